//! Monte Carlo machinery on top of the path sampler and the action
//! quadrature: Kac averages of `e^{u − ∫V}` against bounded weights,
//! ground-state energy estimation from their logarithmic decay, potential
//! handling with a divergence-guard convention, a Kato-class probe, and a
//! one-sided check of the exponential Kac bound for nonnegative potentials.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::action::ActionEvaluator;
use crate::error::{invalid, Error, Result};
use crate::kspace::ModelParams;
use crate::levy::{sample_jump_path, JumpTable, LevyPath, RngStream, Vec2};
use crate::stats::{weighted_linear_fit, RunningStats};

/// Default guard threshold above which a potential evaluation is treated as
/// divergent.
pub const DEFAULT_GUARD: f64 = 1e12;

type ConfigFn = Arc<dyn Fn(&[Vec2]) -> f64 + Send + Sync>;
type SiteFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// External potential acting on the particle configuration.
#[derive(Clone)]
pub enum PotentialKind {
    /// No potential.
    Zero,
    /// An arbitrary bounded callable of the full configuration.
    Bounded(ConfigFn),
    /// Sum of single-site terms Σ_j V₁(x_j) and pair terms Σ_{i<j} V₂(x_i − x_j).
    /// The pair term is symmetrized, so i↔j exchange symmetry holds for any
    /// callable.
    PairSum {
        single: Option<SiteFn>,
        pair: Option<SiteFn>,
    },
}

/// A potential together with the divergence-guard threshold: evaluations
/// whose magnitude exceeds the guard mark the whole path integral as
/// divergent, and the integral is taken to be 0 by convention (the event is
/// counted, never silently dropped).
#[derive(Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub guard: f64,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            guard: DEFAULT_GUARD,
        }
    }

    pub fn bounded<F: Fn(&[Vec2]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self {
            kind: PotentialKind::Bounded(Arc::new(f)),
            guard: DEFAULT_GUARD,
        }
    }

    pub fn pair_sum<S, P>(single: Option<S>, pair: Option<P>) -> Self
    where
        S: Fn(Vec2) -> f64 + Send + Sync + 'static,
        P: Fn(Vec2) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::PairSum {
                single: single.map(|f| Arc::new(f) as SiteFn),
                pair: pair.map(|f| Arc::new(f) as SiteFn),
            },
            guard: DEFAULT_GUARD,
        }
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        if !(guard > 0.0) {
            return Err(invalid!("guard threshold must be positive, got {guard}"));
        }
        self.guard = guard;
        Ok(self)
    }

    /// Pointwise evaluation on a configuration.
    pub fn eval(&self, x: &[Vec2]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Bounded(f) => f(x),
            PotentialKind::PairSum { single, pair } => {
                let mut v = 0.0;
                if let Some(f) = single {
                    v += x.iter().map(|&y| f(y)).sum::<f64>();
                }
                if let Some(f) = pair {
                    for i in 0..x.len() {
                        for j in i + 1..x.len() {
                            let d = x[i] - x[j];
                            v += 0.5 * (f(d) + f(-d));
                        }
                    }
                }
                v
            }
        }
    }
}

/// Result of integrating a potential along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialIntegral {
    /// ∫₀^t V(X^x_s) ds, or 0 if the path was flagged divergent.
    pub value: f64,
    pub diverged: bool,
}

/// Exact time integral of the potential along a piecewise-constant path
/// started at `x`. A segment evaluation beyond the guard flags the path and
/// the integral is 0 by convention.
pub fn potential_integral(
    spec: &PotentialSpec,
    x: &[Vec2],
    path: &LevyPath,
    t: f64,
) -> PotentialIntegral {
    let mut acc = 0.0;
    let mut pos = vec![Vec2::ZERO; x.len()];
    for seg in path.segments_until(t) {
        for (p, (&x0, &d)) in pos.iter_mut().zip(x.iter().zip(&seg.pos)) {
            *p = x0 + d;
        }
        let v = spec.eval(&pos);
        if v.abs() > spec.guard || !v.is_finite() {
            return PotentialIntegral {
                value: 0.0,
                diverged: true,
            };
        }
        acc += (seg.t1 - seg.t0) * v;
    }
    PotentialIntegral {
        value: acc,
        diverged: false,
    }
}

/// Nonnegative bounded weight used both as the initial sampling density and
/// as the terminal factor of the Kac average.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum WeightSpec {
    /// Indicator of the centered box [−half_width, half_width] per coordinate.
    Box { half_width: f64 },
    /// Product Gaussian e^{−|x|²/2·scale²} per coordinate (peak value 1).
    Gaussian { scale: f64 },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        let s = match self {
            WeightSpec::Box { half_width } => *half_width,
            WeightSpec::Gaussian { scale } => *scale,
        };
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid!("weight scale must be positive and finite"));
        }
        Ok(())
    }

    /// Draw a configuration from the normalized weight.
    pub fn sample<R: Rng + ?Sized>(&self, n_particles: usize, rng: &mut R) -> Vec<Vec2> {
        (0..n_particles)
            .map(|_| match self {
                WeightSpec::Box { half_width } => Vec2::new(
                    rng.gen_range(-half_width..*half_width),
                    rng.gen_range(-half_width..*half_width),
                ),
                WeightSpec::Gaussian { scale } => {
                    let gx: f64 = rand_distr::StandardNormal.sample(rng);
                    let gy: f64 = rand_distr::StandardNormal.sample(rng);
                    Vec2::new(scale * gx, scale * gy)
                }
            })
            .collect()
    }

    /// Weight value at a configuration (bounded by 1).
    pub fn eval(&self, x: &[Vec2]) -> f64 {
        match self {
            WeightSpec::Box { half_width } => {
                let inside = x
                    .iter()
                    .all(|p| p.x.abs() <= *half_width && p.y.abs() <= *half_width);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            WeightSpec::Gaussian { scale } => {
                let q: f64 = x.iter().map(|p| p.norm_sq()).sum();
                (-q / (2.0 * scale * scale)).exp()
            }
        }
    }
}

/// Sampling knobs of the Monte Carlo routines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KacConfig {
    /// Small-jump truncation threshold of the path sampler.
    pub eps: f64,
    /// Replace dropped small jumps by matched-variance Gaussian moves.
    pub gaussian_correction: bool,
    /// Pair every path with its point reflection and average the pair.
    pub antithetic: bool,
    /// Number of independent path draws (antithetic pairs count once).
    pub n_paths: usize,
    /// Radial quadrature panels of the per-path action evaluation. The
    /// default matches the high-accuracy profile; Monte Carlo runs can use
    /// far fewer (the quadrature error is then still well below the
    /// statistical error).
    pub radial_panels: usize,
    /// Gauss order per radial panel.
    pub gauss_order: usize,
}

impl Default for KacConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            gaussian_correction: false,
            antithetic: true,
            n_paths: 1024,
            radial_panels: 48,
            gauss_order: 6,
        }
    }
}

/// Mean, standard error and bookkeeping of one Kac average.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KacEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Independent samples entering the mean (antithetic pairs count once).
    pub n_eff: u64,
    /// Paths whose potential integral was divergence-flagged.
    pub flagged: u64,
}

/// Kac averages E[e^{u − ∫V} f(X_t^x)] with x drawn from the normalized
/// weight, evaluated at every ladder time on a common set of paths.
///
/// Identical (seed, stream) pairs reproduce identical draws, so two calls
/// differing only in the potential are coupled by common random numbers.
pub fn kac_ladder(
    params: &ModelParams,
    config: &KacConfig,
    potential: &PotentialSpec,
    ts: &[f64],
    weight: &WeightSpec,
    stream: RngStream,
) -> Result<Vec<KacEstimate>> {
    weight.validate()?;
    if config.n_paths < 2 {
        return Err(invalid!("need at least 2 paths, got {}", config.n_paths));
    }
    if ts.is_empty() || ts.windows(2).any(|p| p[1] <= p[0]) || ts[0] <= 0.0 {
        return Err(invalid!("ladder times must be positive and increasing"));
    }
    let horizon = *ts.last().unwrap();
    let evaluator =
        ActionEvaluator::new(params, config.eps, config.radial_panels, config.gauss_order, 600.0)?;
    let table = JumpTable::new(params.m_p, config.eps, 256)?;
    let mut stats = vec![RunningStats::default(); ts.len()];
    let mut flagged = 0u64;

    for i in 0..config.n_paths {
        let mut rng = stream.substream(i as u64).rng();
        let x = weight.sample(params.n_particles, &mut rng);
        let path = sample_jump_path(
            horizon,
            params.m_p,
            config.eps,
            params.n_particles,
            config.gaussian_correction,
            &table,
            &mut rng,
        )?;
        let mut values = path_values(&evaluator, potential, &x, &path, ts, weight, &mut flagged)?;
        if config.antithetic {
            let twin = path.mirrored();
            let vals2 =
                path_values(&evaluator, potential, &x, &twin, ts, weight, &mut flagged)?;
            for (v, w) in values.iter_mut().zip(vals2) {
                *v = 0.5 * (*v + w);
            }
        }
        for (s, v) in stats.iter_mut().zip(values) {
            s.push(v);
        }
    }

    let per_path = if config.antithetic { 2 } else { 1 } * config.n_paths as u64;
    if flagged >= per_path * ts.len() as u64 {
        return Err(Error::AllPathsFlagged);
    }
    Ok(stats
        .iter()
        .map(|s| KacEstimate {
            mean: s.mean(),
            stderr: s.stderr(),
            n_eff: s.count(),
            flagged,
        })
        .collect())
}

/// One path's integrand e^{u − ∫V}·f(X_t^x) at every ladder time.
fn path_values(
    evaluator: &ActionEvaluator,
    potential: &PotentialSpec,
    x: &[Vec2],
    path: &LevyPath,
    ts: &[f64],
    weight: &WeightSpec,
    flagged: &mut u64,
) -> Result<Vec<f64>> {
    let ladder = evaluator.ladder(x, path, ts, false)?;
    let mut out = Vec::with_capacity(ts.len());
    for (point, &t) in ladder.iter().zip(ts) {
        let vint = potential_integral(potential, x, path, t);
        if vint.diverged {
            *flagged += 1;
        }
        let end: Vec<Vec2> = x
            .iter()
            .enumerate()
            .map(|(j, &x0)| x0 + path.position(j, t))
            .collect();
        out.push((point.u() - vint.value).exp() * weight.eval(&end));
    }
    Ok(out)
}

/// Kac average at a single time.
pub fn kac_average(
    params: &ModelParams,
    config: &KacConfig,
    potential: &PotentialSpec,
    t: f64,
    weight: &WeightSpec,
    stream: RngStream,
) -> Result<KacEstimate> {
    Ok(kac_ladder(params, config, potential, &[t], weight, stream)?[0])
}

/// One ladder entry of a ground-energy estimation run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_eff: u64,
    /// −(1/t)·ln(mean); absent if the mean was nonpositive (noise) and the
    /// point was dropped.
    pub energy: Option<f64>,
    /// Delta-method standard error of the energy.
    pub energy_err: Option<f64>,
}

/// Full report of a ground-energy estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub params: ModelParams,
    pub config: KacConfig,
    pub weight: WeightSpec,
    pub rows: Vec<EnergyRow>,
    /// Intercept of the a + b/t fit over the largest ladder times.
    pub extrapolated: Option<f64>,
    pub extrapolated_err: Option<f64>,
    /// How the extrapolated value was obtained.
    pub method: String,
    pub flagged: u64,
}

/// Estimate the minimal energy from the logarithmic decay of Kac averages:
/// per-t estimates −(1/t)·ln(mean) and an a + b/t extrapolation fitted over
/// the largest ladder times.
pub fn ground_energy(
    params: &ModelParams,
    config: &KacConfig,
    potential: &PotentialSpec,
    t_ladder: &[f64],
    weight: &WeightSpec,
    stream: RngStream,
) -> Result<EstimateReport> {
    let estimates = kac_ladder(params, config, potential, t_ladder, weight, stream)?;
    let flagged = estimates.last().map_or(0, |e| e.flagged);
    let rows: Vec<EnergyRow> = t_ladder
        .iter()
        .zip(&estimates)
        .map(|(&t, e)| {
            let (energy, energy_err) = if e.mean > 0.0 {
                (
                    Some(-e.mean.ln() / t),
                    Some(e.stderr / (e.mean * t)),
                )
            } else {
                (None, None)
            };
            EnergyRow {
                t,
                mean: e.mean,
                stderr: e.stderr,
                n_eff: e.n_eff,
                energy,
                energy_err,
            }
        })
        .collect();

    // Fit energy(t) ≈ a + b/t over the largest half of the usable points,
    // weighted by inverse variance; a estimates the energy.
    let usable: Vec<&EnergyRow> = rows.iter().filter(|r| r.energy.is_some()).collect();
    let tail = &usable[usable.len().saturating_sub(usable.len().div_ceil(2))..];
    let (extrapolated, extrapolated_err, method) = if tail.len() >= 2 {
        let xs: Vec<f64> = tail.iter().map(|r| 1.0 / r.t).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.energy.unwrap()).collect();
        let ws: Vec<f64> = tail
            .iter()
            .map(|r| {
                let e = r.energy_err.unwrap();
                if e > 0.0 {
                    1.0 / (e * e)
                } else {
                    1.0
                }
            })
            .collect();
        let (a, _) = weighted_linear_fit(&xs, &ys, &ws);
        // Crude intercept error: the best row's energy error.
        let err = tail
            .iter()
            .filter_map(|r| r.energy_err)
            .fold(f64::INFINITY, f64::min);
        (
            Some(a),
            Some(err),
            format!("a + b/t fit over the {} largest ladder times", tail.len()),
        )
    } else if let Some(r) = usable.last() {
        (
            r.energy,
            r.energy_err,
            "single usable ladder point".to_string(),
        )
    } else {
        (None, None, "no usable ladder points".to_string())
    };

    Ok(EstimateReport {
        params: *params,
        config: *config,
        weight: *weight,
        rows,
        extrapolated,
        extrapolated_err,
        method,
        flagged,
    })
}

/// One row of the Kato-class probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KatoRow {
    pub t: f64,
    /// MC estimate of sup over the x-grid of E[∫₀^t f(X^x_s) ds].
    pub sup_estimate: f64,
}

/// Probe the Kato-class criterion for a nonnegative single-particle
/// component: estimates sup_x E[∫₀^t f(X^x_s) ds] over the x-grid per ladder
/// time. Membership manifests as the column decreasing to 0 as t ↓ 0.
pub fn kato_probe<F: Fn(Vec2) -> f64>(
    m_p: f64,
    config: &KacConfig,
    f: F,
    t_ladder: &[f64],
    x_grid: &[Vec2],
    stream: RngStream,
) -> Result<Vec<KatoRow>> {
    if t_ladder.is_empty() || t_ladder.windows(2).any(|p| p[1] <= p[0]) || t_ladder[0] <= 0.0 {
        return Err(invalid!("ladder times must be positive and increasing"));
    }
    if x_grid.is_empty() {
        return Err(invalid!("need at least one grid point"));
    }
    let horizon = *t_ladder.last().unwrap();
    let table = JumpTable::new(m_p, config.eps, 256)?;
    let mut sups = vec![f64::NEG_INFINITY; t_ladder.len()];
    for (ix, &x) in x_grid.iter().enumerate() {
        let mut means = vec![RunningStats::default(); t_ladder.len()];
        for i in 0..config.n_paths {
            let mut rng = stream.substream((ix * config.n_paths + i) as u64).rng();
            let path = sample_jump_path(
                horizon,
                m_p,
                config.eps,
                1,
                config.gaussian_correction,
                &table,
                &mut rng,
            )?;
            // Cumulative ∫f along the segments, read off at each ladder time.
            let segs = path.segments_until(horizon);
            let mut k = 0;
            let mut acc = 0.0;
            for (stat, &t) in means.iter_mut().zip(t_ladder) {
                while k < segs.len() && segs[k].t1 <= t {
                    acc += (segs[k].t1 - segs[k].t0) * f(x + segs[k].pos[0]);
                    k += 1;
                }
                let mut val = acc;
                if k < segs.len() && t > segs[k].t0 {
                    val += (t - segs[k].t0) * f(x + segs[k].pos[0]);
                }
                stat.push(val);
            }
        }
        for (sup, stat) in sups.iter_mut().zip(&means) {
            *sup = sup.max(stat.mean());
        }
    }
    Ok(t_ladder
        .iter()
        .zip(sups)
        .map(|(&t, sup_estimate)| KatoRow { t, sup_estimate })
        .collect())
}

/// Outcome of the one-sided exponential Kac bound check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CarmonaCheck {
    /// MC estimate of sup_x E[exp ∫₀^t v(x + Y_s) ds] over the x-grid.
    pub lhs: f64,
    /// Closed-form envelope with the supplied calibration constants.
    pub rhs: f64,
    pub respected: bool,
}

/// Closed-form right side of the exponential Kac bound in two dimensions:
/// prefactor · exp(rate · a^{−1/(p−1)} · (m_p^{1/p}‖v‖_p + ‖v‖_{2p})^{p′} · t),
/// where the process has symbol −a·ψ and p > 1.
#[allow(clippy::too_many_arguments)] // mirrors the parameters of the formula
pub fn carmona_envelope(
    a: f64,
    p: f64,
    t: f64,
    m_p: f64,
    norm_p: f64,
    norm_2p: f64,
    prefactor: f64,
    rate: f64,
) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid!("need p > 1 in two dimensions, got {p}"));
    }
    if !(a > 0.0) {
        return Err(invalid!("speed a must be positive, got {a}"));
    }
    let p_conj = p / (p - 1.0);
    let strength = m_p.powf(1.0 / p) * norm_p + norm_2p;
    Ok(prefactor * (rate * a.powf(-1.0 / (p - 1.0)) * strength.powf(p_conj) * t).exp())
}

/// One-sided check of the exponential Kac bound: MC estimate of
/// sup_x E[exp ∫₀^t v(x + Y_s) ds] for a nonnegative v against the envelope.
/// Y (symbol −a·ψ) is realized as the base process run at speed a.
#[allow(clippy::too_many_arguments)]
pub fn carmona_check<F: Fn(Vec2) -> f64>(
    m_p: f64,
    config: &KacConfig,
    v: F,
    a: f64,
    p: f64,
    t: f64,
    norm_p: f64,
    norm_2p: f64,
    prefactor: f64,
    rate: f64,
    x_grid: &[Vec2],
    stream: RngStream,
) -> Result<CarmonaCheck> {
    let rhs = carmona_envelope(a, p, t, m_p, norm_p, norm_2p, prefactor, rate)?;
    if x_grid.is_empty() {
        return Err(invalid!("need at least one grid point"));
    }
    let table = JumpTable::new(m_p, config.eps, 256)?;
    let mut lhs = f64::NEG_INFINITY;
    for (ix, &x) in x_grid.iter().enumerate() {
        let mut stat = RunningStats::default();
        for i in 0..config.n_paths {
            let mut rng = stream.substream((ix * config.n_paths + i) as u64).rng();
            // Y_s = X_{a s}, so ∫₀^t v(Y_s) ds = (1/a)·∫₀^{a t} v(X_r) dr.
            let path = sample_jump_path(
                a * t,
                m_p,
                config.eps,
                1,
                config.gaussian_correction,
                &table,
                &mut rng,
            )?;
            let mut acc = 0.0;
            for seg in path.segments() {
                acc += (seg.t1 - seg.t0) * v(x + seg.pos[0]);
            }
            stat.push((acc / a).exp());
        }
        lhs = lhs.max(stat.mean());
    }
    Ok(CarmonaCheck {
        lhs,
        rhs,
        respected: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, m_p: f64, m_b: f64, g: f64) -> ModelParams {
        ModelParams::new(n, m_p, m_b, g, 0.0, f64::INFINITY)
    }

    fn sample_path(params: &ModelParams, eps: f64, horizon: f64, seed: u64) -> LevyPath {
        let table = JumpTable::new(params.m_p, eps, 256).unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        sample_jump_path(
            horizon,
            params.m_p,
            eps,
            params.n_particles,
            false,
            &table,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn potential_integral_closed_forms() {
        let p = params(2, 1.0, 1.0, 0.5);
        let path = sample_path(&p, 0.2, 3.0, 5);
        let x = [Vec2::new(0.3, -0.1), Vec2::new(-1.0, 0.4)];

        let zero = PotentialSpec::zero();
        assert_eq!(potential_integral(&zero, &x, &path, 2.5).value, 0.0);

        let constant = PotentialSpec::bounded(|_: &[Vec2]| 1.75);
        let out = potential_integral(&constant, &x, &path, 2.5);
        assert!(!out.diverged);
        assert!((out.value - 1.75 * 2.5).abs() < 1e-12);

        // Frozen path with a pair term: t · V₁₂(x₁ − x₂).
        let frozen = LevyPath::constant(2, 3.0);
        let pair = PotentialSpec::pair_sum(
            None::<fn(Vec2) -> f64>,
            Some(|d: Vec2| 1.0 / (1.0 + d.norm_sq())),
        );
        let out = potential_integral(&pair, &x, &frozen, 2.0);
        let d = x[0] - x[1];
        assert!((out.value - 2.0 / (1.0 + d.norm_sq())).abs() < 1e-12);
    }

    #[test]
    fn pair_sum_is_exchange_symmetric_even_for_odd_callables() {
        let spec = PotentialSpec::pair_sum(None::<fn(Vec2) -> f64>, Some(|d: Vec2| d.x));
        let a = [Vec2::new(1.0, 0.0), Vec2::new(-2.0, 0.0)];
        let b = [Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0)];
        assert_eq!(spec.eval(&a), spec.eval(&b));
        assert_eq!(spec.eval(&a), 0.0);
    }

    #[test]
    fn guard_flags_divergent_segment_and_returns_zero() {
        let p = params(1, 1.0, 1.0, 0.0);
        let path = sample_path(&p, 0.2, 1.0, 9);
        let spec = PotentialSpec::bounded(|_: &[Vec2]| 1e15);
        let out = potential_integral(&spec, &[Vec2::ZERO], &path, 1.0);
        assert!(out.diverged);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn free_kac_average_is_one_in_a_huge_box() {
        let p = params(1, 1.0, 1.0, 0.0);
        let config = KacConfig {
            n_paths: 64,
            ..KacConfig::default()
        };
        let weight = WeightSpec::Box { half_width: 1e6 };
        let est = kac_average(
            &p,
            &config,
            &PotentialSpec::zero(),
            1.0,
            &weight,
            RngStream::new(3, 0),
        )
        .unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12, "mean {}", est.mean);
        assert_eq!(est.flagged, 0, "bounded potential must not be flagged");
        assert!(est.stderr >= 0.0);
    }

    #[test]
    fn constant_shift_tilts_the_average_exactly() {
        let p = params(1, 1.0, 1.0, 0.4);
        let config = KacConfig {
            n_paths: 32,
            ..KacConfig::default()
        };
        let weight = WeightSpec::Gaussian { scale: 1.0 };
        let stream = RngStream::new(11, 0);
        let (t, c) = (1.5, 0.8);
        let base = kac_average(&p, &config, &PotentialSpec::zero(), t, &weight, stream).unwrap();
        let shifted = kac_average(
            &p,
            &config,
            &PotentialSpec::bounded(move |_: &[Vec2]| c),
            t,
            &weight,
            stream,
        )
        .unwrap();
        let expect = (-c * t).exp() * base.mean;
        assert!(
            (shifted.mean - expect).abs() < 1e-12 * expect.abs(),
            "{} vs {}",
            shifted.mean,
            expect
        );
    }

    #[test]
    fn variance_shrinks_like_one_over_n() {
        let p = params(1, 1.0, 1.0, 0.5);
        let weight = WeightSpec::Gaussian { scale: 1.0 };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, n) in [64usize, 256, 1024].into_iter().enumerate() {
            let config = KacConfig {
                n_paths: n,
                antithetic: false,
                ..KacConfig::default()
            };
            let est = kac_average(
                &p,
                &config,
                &PotentialSpec::zero(),
                1.0,
                &weight,
                RngStream::new(21 + i as u64, 0),
            )
            .unwrap();
            xs.push((n as f64).ln());
            ys.push((est.stderr * est.stderr).ln());
        }
        let (_, slope) = crate::stats::linear_fit(&xs, &ys);
        assert!((slope + 1.0).abs() < 0.35, "CLT slope {slope}");
    }

    #[test]
    fn action_is_quadratic_in_the_coupling_per_path() {
        // Every action piece carries g², so u(2g) = 4·u(g) path by path.
        let p1 = params(2, 1.0, 1.0, 0.7);
        let p2 = params(2, 1.0, 1.0, 1.4);
        let path = sample_path(&p1, 0.15, 1.0, 33);
        let x = [Vec2::new(0.2, 0.1), Vec2::new(-0.4, 0.6)];
        let e1 = ActionEvaluator::with_defaults(&p1, 0.15).unwrap();
        let e2 = ActionEvaluator::with_defaults(&p2, 0.15).unwrap();
        let u1 = e1.ladder(&x, &path, &[1.0], false).unwrap()[0].u();
        let u2 = e2.ladder(&x, &path, &[1.0], false).unwrap()[0].u();
        assert!((u2 - 4.0 * u1).abs() < 1e-10 * u1.abs().max(1.0), "{u2} vs {}", 4.0 * u1);
    }

    #[test]
    fn free_ground_energy_is_zero_and_shifts_with_constant_potential() {
        let p = params(1, 1.0, 1.0, 0.0);
        let config = KacConfig {
            n_paths: 16,
            ..KacConfig::default()
        };
        let weight = WeightSpec::Box { half_width: 1e6 };
        let ladder = [1.0, 2.0, 4.0, 8.0];
        let stream = RngStream::new(5, 0);
        let free = ground_energy(&p, &config, &PotentialSpec::zero(), &ladder, &weight, stream)
            .unwrap();
        for row in &free.rows {
            assert!(row.energy.unwrap().abs() < 1e-12);
            assert!(row.stderr >= 0.0 && row.mean.is_finite());
        }
        assert!(free.extrapolated.unwrap().abs() < 1e-12);

        let c = 0.65;
        let shifted = ground_energy(
            &p,
            &config,
            &PotentialSpec::bounded(move |_: &[Vec2]| c),
            &ladder,
            &weight,
            stream,
        )
        .unwrap();
        for row in &shifted.rows {
            assert!((row.energy.unwrap() - c).abs() < 1e-12);
        }
        assert!((shifted.extrapolated.unwrap() - c).abs() < 1e-12);
        assert_eq!(shifted.flagged, 0);
    }

    #[test]
    fn report_serializes_to_json() {
        let p = params(1, 1.0, 1.0, 0.0);
        let config = KacConfig {
            n_paths: 4,
            ..KacConfig::default()
        };
        let weight = WeightSpec::Box { half_width: 10.0 };
        let report = ground_energy(
            &p,
            &config,
            &PotentialSpec::zero(),
            &[0.5, 1.0],
            &weight,
            RngStream::new(1, 0),
        )
        .unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"rows\""));
    }

    #[test]
    fn kato_probe_is_exact_for_unit_component() {
        let config = KacConfig {
            n_paths: 8,
            ..KacConfig::default()
        };
        let ladder = [0.25, 0.5, 1.0];
        let grid = [Vec2::ZERO, Vec2::new(1.0, 1.0)];
        let rows = kato_probe(1.0, &config, |_| 1.0, &ladder, &grid, RngStream::new(2, 0))
            .unwrap();
        for (row, &t) in rows.iter().zip(&ladder) {
            assert!((row.sup_estimate - t).abs() < 1e-12);
        }
    }

    #[test]
    fn kato_probe_decreases_for_integrable_singularity() {
        // f = min(|y|^{-1/2}, M): a capped local singularity; the probe must
        // decrease toward 0 as t ↓ 0.
        let config = KacConfig {
            eps: 0.05,
            n_paths: 256,
            ..KacConfig::default()
        };
        let ladder = [0.004, 0.016, 0.0625, 0.25, 1.0];
        let grid = [Vec2::ZERO, Vec2::new(0.5, 0.0), Vec2::new(0.0, -1.0)];
        let f = |y: Vec2| y.norm().powf(-0.5).min(50.0);
        let rows = kato_probe(0.0, &config, f, &ladder, &grid, RngStream::new(17, 0)).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[0].sup_estimate < w[1].sup_estimate,
                "not decreasing toward 0: {rows:?}"
            );
        }
        assert!(rows[0].sup_estimate < 0.3 * rows.last().unwrap().sup_estimate);
    }

    #[test]
    fn kato_probe_vanishes_far_from_support() {
        let config = KacConfig {
            n_paths: 64,
            ..KacConfig::default()
        };
        let f = |y: Vec2| if (y - Vec2::new(500.0, 0.0)).norm() < 1.0 { 1.0 } else { 0.0 };
        let rows = kato_probe(
            1.0,
            &config,
            f,
            &[0.1, 0.2],
            &[Vec2::ZERO],
            RngStream::new(4, 0),
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.sup_estimate == 0.0));
    }

    #[test]
    fn exponential_kac_bound_respected_and_monotone_in_speed() {
        // v ≡ 0: left side is exactly 1.
        let config = KacConfig {
            n_paths: 16,
            ..KacConfig::default()
        };
        let check = carmona_check(
            1.0,
            &config,
            |_| 0.0,
            1.0,
            2.0,
            1.0,
            0.0,
            0.0,
            1.0,
            1.0,
            &[Vec2::ZERO],
            RngStream::new(6, 0),
        )
        .unwrap();
        assert_eq!(check.lhs, 1.0);
        assert!(check.respected);

        // Bounded bump: pointwise LHS ≤ e^{Mt}; envelope decreases as the
        // speed a doubles (the a^{−1/(p−1)} factor).
        let m = 0.8;
        let bump = move |y: Vec2| if y.norm() < 1.0 { m } else { 0.0 };
        let (p, t) = (2.0, 0.5);
        // L^p norms of the bump over the unit disc: M·π^{1/p}.
        let norm_p = m * std::f64::consts::PI.powf(1.0 / p);
        let norm_2p = m * std::f64::consts::PI.powf(1.0 / (2.0 * p));
        let mut prev = f64::INFINITY;
        for a in [1.0, 2.0, 4.0] {
            let check = carmona_check(
                1.0,
                &config,
                bump,
                a,
                p,
                t,
                norm_p,
                norm_2p,
                2.0,
                1.0,
                &[Vec2::ZERO, Vec2::new(0.5, 0.5)],
                RngStream::new(8, 0),
            )
            .unwrap();
            assert!(check.lhs <= (m * t).exp() + 1e-12);
            assert!(check.respected, "{check:?} at a={a}");
            assert!(check.rhs < prev, "envelope not decreasing in a");
            prev = check.rhs;
        }
    }
}
