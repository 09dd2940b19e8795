//! Sampling of the 2D relativistic Lévy process: exact grid increments by
//! Gaussian subordination, a jump-resolved compound-Poisson approximation
//! with small-jump threshold ε, and path surgery for flow tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{jump_small_second_moment, jump_tail_mass};

/// Plain 2-vector with Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

/// Counter-based splittable random stream: identical (seed, stream) pairs
/// reproduce identical draws bit-exactly; distinct streams are independent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Materialize the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derive a child stream; splitmix-style mixing keeps children disjoint.
    pub fn substream(&self, salt: u64) -> RngStream {
        let mut z = self
            .stream
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(salt)
            .wrapping_add(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        RngStream::new(self.seed, z ^ (z >> 31))
    }
}

/// One increment of the subordinator with Laplace exponent
/// √(2u + m_p²) − m_p over a time step dt.
///
/// m_p > 0: inverse-Gaussian(μ = dt/m_p, λ = dt²) by the
/// Michael–Schucany–Haas construction; m_p = 0: the ½-stable limit
/// S = (dt/Z)² with Z standard normal.
pub fn sample_subordinator<R: Rng + ?Sized>(dt: f64, m_p: f64, rng: &mut R) -> f64 {
    assert!(dt > 0.0, "time step must be positive");
    if m_p == 0.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z != 0.0 {
                return (dt / z).powi(2);
            }
        }
    } else {
        let mu = dt / m_p;
        let lam = dt * dt;
        let z: f64 = StandardNormal.sample(rng);
        let y = z * z;
        let x = mu + mu * mu * y / (2.0 * lam)
            - mu / (2.0 * lam) * (4.0 * mu * lam * y + mu * mu * y * y).sqrt();
        let u: f64 = rng.gen();
        if u <= mu / (mu + x) {
            x
        } else {
            mu * mu / x
        }
    }
}

/// Exact increment of the process over dt: √S · (standard 2D Gaussian),
/// so that E[e^{iξ·X_dt}] = e^{-dt ψ(ξ)}.
pub fn sample_increment<R: Rng + ?Sized>(dt: f64, m_p: f64, rng: &mut R) -> Vec2 {
    let s = sample_subordinator(dt, m_p, rng).sqrt();
    let gx: f64 = StandardNormal.sample(rng);
    let gy: f64 = StandardNormal.sample(rng);
    Vec2::new(s * gx, s * gy)
}

/// One event of a piecewise-constant path. `is_jump` marks genuine Poisson
/// jumps (entering the martingale jump list), as opposed to the optional
/// Gaussian small-jump correction moves.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathEvent {
    pub t: f64,
    pub particle: usize,
    pub jump: Vec2,
    pub is_jump: bool,
}

/// Piecewise-constant multi-particle path skeleton on [0, horizon], starting
/// at the origin for every particle, right-continuous with left limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevyPath {
    pub n_particles: usize,
    pub horizon: f64,
    /// Events sorted by strictly increasing time in (0, horizon].
    pub events: Vec<PathEvent>,
    /// Small-jump threshold used when sampling.
    pub eps: f64,
    /// Whether the Gaussian small-jump correction was applied.
    pub gaussian_correction: bool,
}

/// A maximal interval on which every particle is frozen.
#[derive(Debug, Clone)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    /// Position of each particle on [t0, t1).
    pub pos: Vec<Vec2>,
}

impl LevyPath {
    /// The constant path (no events).
    pub fn constant(n_particles: usize, horizon: f64) -> Self {
        Self {
            n_particles,
            horizon,
            events: Vec::new(),
            eps: f64::INFINITY,
            gaussian_correction: false,
        }
    }

    /// Position of a particle at time t (value after the last event ≤ t).
    pub fn position(&self, particle: usize, t: f64) -> Vec2 {
        let mut p = Vec2::ZERO;
        for ev in &self.events {
            if ev.t > t {
                break;
            }
            if ev.particle == particle {
                p += ev.jump;
            }
        }
        p
    }

    /// Positions of all particles at time t.
    pub fn positions(&self, t: f64) -> Vec<Vec2> {
        let mut p = vec![Vec2::ZERO; self.n_particles];
        for ev in &self.events {
            if ev.t > t {
                break;
            }
            p[ev.particle] += ev.jump;
        }
        p
    }

    /// Segment decomposition of [0, min(t_max, horizon)].
    pub fn segments_until(&self, t_max: f64) -> Vec<Segment> {
        let end = t_max.min(self.horizon);
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut pos = vec![Vec2::ZERO; self.n_particles];
        let mut t0 = 0.0;
        for ev in &self.events {
            if ev.t >= end {
                break;
            }
            if ev.t > t0 {
                out.push(Segment {
                    t0,
                    t1: ev.t,
                    pos: pos.clone(),
                });
                t0 = ev.t;
            }
            pos[ev.particle] += ev.jump;
        }
        if end > t0 || out.is_empty() {
            out.push(Segment { t0, t1: end, pos });
        }
        out
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.segments_until(self.horizon)
    }

    /// Genuine Poisson jumps up to and including t.
    pub fn jumps_until(&self, t: f64) -> impl Iterator<Item = &PathEvent> {
        self.events.iter().filter(move |e| e.is_jump && e.t <= t)
    }

    /// Point reflection of every move; an antithetic partner by symmetry of
    /// the jump measure.
    pub fn mirrored(&self) -> LevyPath {
        let mut p = self.clone();
        for ev in &mut p.events {
            ev.jump = -ev.jump;
        }
        p
    }
}

/// Precomputed radial tail table for jump-radius sampling. The tail mass
/// above r is known in closed form (e^{-m_p r}/r); the log-grid table
/// provides brackets and starting points for the exact Newton inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpTable {
    pub m_p: f64,
    pub eps: f64,
    /// Radii, log-spaced from ε upward.
    pub radii: Vec<f64>,
    /// Tail masses ν(|y| > r) at the radii (strictly decreasing).
    pub tails: Vec<f64>,
    /// Total rate λ(ε) = ν(|y| > ε).
    pub rate: f64,
}

impl JumpTable {
    pub fn new(m_p: f64, eps: f64, n_points: usize) -> Result<Self> {
        if eps <= 0.0 {
            return Err(invalid!("small-jump threshold must be positive, got {eps}"));
        }
        let n = n_points.max(16);
        let rate = jump_tail_mass(eps, m_p);
        // Cut where the remaining mass is negligible relative to the rate.
        let r_cut = if m_p == 0.0 {
            eps * 1e15
        } else {
            // Solve e^{-m r}/r = 1e-15 λ by fixed-point on r = (ln(1/(T r)))/m.
            let target = 1e-15 * rate;
            let mut r = eps.max(1.0 / m_p);
            for _ in 0..64 {
                r = ((1.0 / (target * r)).ln() / m_p).max(eps * 2.0);
            }
            r
        };
        let ratio = (r_cut / eps).powf(1.0 / (n as f64 - 1.0));
        let radii: Vec<f64> = (0..n).map(|i| eps * ratio.powi(i as i32)).collect();
        let tails: Vec<f64> = radii.iter().map(|&r| jump_tail_mass(r, m_p)).collect();
        Ok(Self {
            m_p,
            eps,
            radii,
            tails,
            rate,
        })
    }

    /// Draw one jump radius by exact inverse-CDF of the radial tail.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let target = self.rate * u; // tail mass of the drawn radius
        if self.m_p == 0.0 {
            return 1.0 / target;
        }
        // Bracket via the table, then Newton on f(r) = -m r - ln r - ln T.
        let idx = self
            .tails
            .partition_point(|&t| t > target)
            .clamp(1, self.tails.len() - 1);
        let (mut lo, mut hi) = (self.radii[idx - 1], self.radii[idx]);
        if target < self.tails[self.tails.len() - 1] {
            hi = self.radii[self.radii.len() - 1] * 64.0;
        }
        let ln_t = target.ln();
        let mut r = (lo * hi).sqrt();
        for _ in 0..64 {
            let f = -self.m_p * r - r.ln() - ln_t;
            if f > 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let step = f / (self.m_p + 1.0 / r); // f decreasing; step has f's sign
            let next = r + step;
            r = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (hi - lo) < 1e-14 * r {
                break;
            }
        }
        r
    }
}

/// Compound-Poisson approximation of the process: per particle, jumps of
/// size > ε at rate λ(ε), radii by inverse-CDF, angles uniform; optional
/// Gaussian correction replacing the dropped small jumps by frozen moves on
/// a staggered grid with the matching per-axis variance rate ½∫_{|y|≤ε}|y|²dν.
pub fn sample_jump_path<R: Rng + ?Sized>(
    horizon: f64,
    m_p: f64,
    eps: f64,
    n_particles: usize,
    gaussian_correction: bool,
    table: &JumpTable,
    rng: &mut R,
) -> Result<LevyPath> {
    if eps <= 0.0 {
        return Err(invalid!("small-jump threshold must be positive, got {eps}"));
    }
    debug_assert_eq!(table.eps, eps);
    debug_assert_eq!(table.m_p, m_p);
    let mut events = Vec::new();
    for j in 0..n_particles {
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(rng);
            let gap = gap / table.rate;
            t += gap;
            if t >= horizon {
                break;
            }
            let r = table.sample_radius(rng);
            let th: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            events.push(PathEvent {
                t,
                particle: j,
                jump: Vec2::new(r * th.cos(), r * th.sin()),
                is_jump: true,
            });
        }
    }
    if gaussian_correction {
        let var_rate = 0.5 * jump_small_second_moment(eps, m_p);
        let n_steps = ((horizon / eps.min(horizon)).ceil() as usize).clamp(8, 512);
        let dt = horizon / n_steps as f64;
        let sd = (var_rate * dt).sqrt();
        for j in 0..n_particles {
            // Stagger per particle so event times stay strictly increasing.
            let off = dt * (j as f64 + 1.0) / (n_particles as f64 + 1.0);
            for i in 0..n_steps {
                let t = i as f64 * dt + off;
                if t >= horizon {
                    break;
                }
                let gx: f64 = StandardNormal.sample(rng);
                let gy: f64 = StandardNormal.sample(rng);
                events.push(PathEvent {
                    t,
                    particle: j,
                    jump: Vec2::new(sd * gx, sd * gy),
                    is_jump: false,
                });
            }
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(LevyPath {
        n_particles,
        horizon,
        events,
        eps,
        gaussian_correction,
    })
}

/// Split a path at time t: returns the positions X_t and the shifted path
/// s ↦ X_{t+s} − X_t on [0, horizon − t].
pub fn split_path(path: &LevyPath, t: f64) -> Result<(Vec<Vec2>, LevyPath)> {
    if !(0.0..=path.horizon).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "split time {t} outside horizon [0, {}]",
            path.horizon
        )));
    }
    let prefix = path.positions(t);
    let events = path
        .events
        .iter()
        .filter(|e| e.t > t)
        .map(|e| PathEvent { t: e.t - t, ..*e })
        .collect();
    Ok((
        prefix,
        LevyPath {
            n_particles: path.n_particles,
            horizon: path.horizon - t,
            events,
            eps: path.eps,
            gaussian_correction: path.gaussian_correction,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::marginal_radial_cdf;
    use crate::stats;

    #[test]
    fn increment_mean_is_zero() {
        let mut rng = RngStream::new(7, 0).rng();
        let n = 1_000_000;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = sample_increment(0.5, 1.0, &mut rng);
            sx += v.x;
            sy += v.y;
            sxx += v.x * v.x;
            syy += v.y * v.y;
        }
        let nf = n as f64;
        let se_x = (sxx / nf).sqrt() / nf.sqrt();
        let se_y = (syy / nf).sqrt() / nf.sqrt();
        assert!((sx / nf).abs() < 4.0 * se_x);
        assert!((sy / nf).abs() < 4.0 * se_y);
    }

    #[test]
    fn increment_characteristic_function_matches_symbol() {
        let t = 0.8;
        for &m_p in &[0.0, 1.3] {
            let mut rng = RngStream::new(11, m_p as u64).rng();
            let n = 200_000;
            let samples: Vec<Vec2> = (0..n).map(|_| sample_increment(t, m_p, &mut rng)).collect();
            let mut xi_rng = RngStream::new(5, 1).rng();
            for _ in 0..20 {
                let xi = Vec2::new(xi_rng.gen_range(-3.0..3.0), xi_rng.gen_range(-3.0..3.0));
                let psi = (xi.norm_sq() + m_p * m_p).sqrt() - m_p;
                let expected = (-t * psi).exp();
                let (mut re, mut re2) = (0.0, 0.0);
                for v in &samples {
                    let c = (xi.dot(*v)).cos();
                    re += c;
                    re2 += c * c;
                }
                let mean = re / n as f64;
                let var = (re2 / n as f64 - mean * mean).max(0.0);
                let se = (var / n as f64).sqrt();
                assert!(
                    (mean - expected).abs() < 4.0 * se + 1e-9,
                    "m_p={m_p} xi=({}, {}): {mean} vs {expected} (se {se})",
                    xi.x,
                    xi.y
                );
            }
        }
    }

    #[test]
    fn exact_increments_match_marginal_law() {
        // KS test against the closed-form radial CDF at the 1% level.
        for &m_p in &[0.0, 1.0] {
            let mut rng = RngStream::new(3, m_p as u64).rng();
            let n = 50_000;
            let mut radii: Vec<f64> =
                (0..n).map(|_| sample_increment(1.0, m_p, &mut rng).norm()).collect();
            let ks = stats::ks_statistic(&mut radii, |r| marginal_radial_cdf(r, 1.0, m_p));
            let crit = 1.628 / (n as f64).sqrt();
            assert!(ks < crit, "m_p={m_p}: KS {ks} ≥ {crit}");
        }
    }

    #[test]
    fn jump_count_is_poisson_with_tail_rate() {
        let (m_p, eps) = (1.0, 0.3);
        let table = JumpTable::new(m_p, eps, 128).unwrap();
        let mut rng = RngStream::new(21, 0).rng();
        let n = 20_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_jump_path(1.0, m_p, eps, 1, false, &table, &mut rng).unwrap();
            let c = p.jumps_until(1.0).count() as f64;
            s += c;
            s2 += c * c;
        }
        let mean = s / n as f64;
        let var = (s2 / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - table.rate).abs() < 4.0 * se, "{mean} vs {}", table.rate);
    }

    #[test]
    fn jump_radius_law_matches_tail_mass() {
        // Empirical CDF of sampled radii vs 1 - tail(r)/λ.
        for &m_p in &[0.0, 2.0] {
            let eps = 0.2;
            let table = JumpTable::new(m_p, eps, 128).unwrap();
            let mut rng = RngStream::new(9, 4).rng();
            let n = 50_000;
            let mut radii: Vec<f64> = (0..n).map(|_| table.sample_radius(&mut rng)).collect();
            let ks = stats::ks_statistic(&mut radii, |r| {
                if r <= eps {
                    0.0
                } else {
                    1.0 - jump_tail_mass(r, m_p) / table.rate
                }
            });
            assert!(ks < 1.628 / (n as f64).sqrt(), "m_p={m_p}: KS {ks}");
        }
    }

    #[test]
    fn jump_angles_uniform_chi_squared() {
        let table = JumpTable::new(0.0, 0.5, 64).unwrap();
        let mut rng = RngStream::new(13, 2).rng();
        let mut bins = [0usize; 16];
        let mut total = 0usize;
        while total < 20_000 {
            let p = sample_jump_path(5.0, 0.0, 0.5, 1, false, &table, &mut rng).unwrap();
            for ev in p.jumps_until(5.0) {
                let a = ev.jump.y.atan2(ev.jump.x).rem_euclid(2.0 * std::f64::consts::PI);
                bins[(a / (2.0 * std::f64::consts::PI) * 16.0) as usize % 16] += 1;
                total += 1;
            }
        }
        let expect = total as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expect).powi(2) / expect).sum();
        // 1% critical value of chi-squared with 15 degrees of freedom.
        assert!(chi2 < 30.578, "chi2 {chi2}");
    }

    #[test]
    fn particles_are_independent() {
        let table = JumpTable::new(1.0, 0.3, 64).unwrap();
        let mut rng = RngStream::new(17, 8).rng();
        let n = 20_000;
        let (mut sxy, mut sx, mut sy, mut sx2, mut sy2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = sample_jump_path(1.0, 1.0, 0.3, 2, false, &table, &mut rng).unwrap();
            let a = p.position(0, 1.0).x;
            let b = p.position(1, 1.0).x;
            sxy += a * b;
            sx += a;
            sy += b;
            sx2 += a * a;
            sy2 += b * b;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let se = ((sx2 / nf) * (sy2 / nf) / nf).sqrt();
        assert!(cov.abs() < 4.0 * se, "cov {cov}, se {se}");
    }

    #[test]
    fn approximation_improves_as_threshold_shrinks() {
        // KS distance of the jump-resolved |X_1| law to the exact law
        // decreases along an ε-ladder (Gaussian correction off).
        let m_p = 0.0;
        let n = 30_000;
        let mut last = f64::INFINITY;
        for &eps in &[1.0, 0.3, 0.1] {
            let table = JumpTable::new(m_p, eps, 128).unwrap();
            let mut rng = RngStream::new(29, (eps * 1000.0) as u64).rng();
            let mut radii: Vec<f64> = (0..n)
                .map(|_| {
                    let p = sample_jump_path(1.0, m_p, eps, 1, false, &table, &mut rng).unwrap();
                    p.position(0, 1.0).norm()
                })
                .collect();
            let ks = stats::ks_statistic(&mut radii, |r| marginal_radial_cdf(r, 1.0, m_p));
            assert!(ks < last, "eps={eps}: KS {ks} ≥ previous {last}");
            last = ks;
        }
    }

    #[test]
    fn split_path_identities() {
        let table = JumpTable::new(1.0, 0.2, 64).unwrap();
        let mut rng = RngStream::new(31, 0).rng();
        let path = sample_jump_path(2.0, 1.0, 0.2, 2, false, &table, &mut rng).unwrap();
        let (prefix, shifted) = split_path(&path, 0.0).unwrap();
        assert_eq!(prefix, vec![Vec2::ZERO; 2]);
        assert_eq!(shifted.events.len(), path.events.len());

        let (_, tail) = split_path(&path, path.horizon).unwrap();
        assert!(tail.events.is_empty());
        assert_eq!(tail.horizon, 0.0);

        let t = 0.7;
        let (at_t, shifted) = split_path(&path, t).unwrap();
        for i in 0..10 {
            let s = 0.13 * i as f64;
            for j in 0..2 {
                let lhs = path.position(j, t + s);
                let rhs = at_t[j] + shifted.position(j, s);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_bit_reproducible() {
        let table = JumpTable::new(1.0, 0.2, 64).unwrap();
        let mk = || {
            let mut rng = RngStream::new(99, 5).rng();
            sample_jump_path(3.0, 1.0, 0.2, 2, true, &table, &mut rng).unwrap()
        };
        let (a, b) = (mk(), mk());
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.jump.x.to_bits(), y.jump.x.to_bits());
            assert_eq!(x.jump.y.to_bits(), y.jump.y.to_bits());
        }
    }

    #[test]
    fn event_times_strictly_increasing() {
        let table = JumpTable::new(0.5, 0.25, 64).unwrap();
        let mut rng = RngStream::new(41, 3).rng();
        for _ in 0..50 {
            let p = sample_jump_path(2.0, 0.5, 0.25, 3, true, &table, &mut rng).unwrap();
            for w in p.events.windows(2) {
                assert!(w[0].t < w[1].t);
            }
        }
    }
}
