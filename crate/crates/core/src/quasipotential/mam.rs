use serde::{Deserialize, Serialize};

use super::banded::{Banded, BandedCholesky};
use crate::action::stencil::{node, quadratic_action, residual, v_end, v_start, Ends, Stencil};
use crate::dynamics::{Equation, Path, TimeGrid};
use crate::error::{invalid, Result};
use crate::spectral::{check_mass, Field, Nonlinearity, SpectralConfig};

/// Terminal velocity of a wave minimum-action problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointVelocity {
    Fixed(Field),
    /// The terminal velocity is optimised together with the path.
    Free,
}

/// Where paths start at `-T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Start {
    /// At rest at the equilibrium `0`.
    Origin,
    /// At rest anywhere in the closed `H`-ball of this radius.
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MamOptions {
    /// Path step; `None` picks `min(0.25/α_K, μ/16)`.
    pub dt: Option<f64>,
    pub initial_horizon: f64,
    pub max_horizon: f64,
    /// Relative action change between consecutive horizons that ends the
    /// doubling ladder.
    pub horizon_rel_tol: f64,
    /// Descent iterations per horizon.
    pub max_iters: usize,
    /// Stop when `½ gᵀP⁻¹g ≤ tolerance · (1 + S)`.
    pub tolerance: f64,
}

impl Default for MamOptions {
    fn default() -> Self {
        Self {
            dt: None,
            initial_horizon: 4.0,
            max_horizon: 128.0,
            horizon_rel_tol: 1e-3,
            max_iters: 3000,
            tolerance: 1e-11,
        }
    }
}

/// A minimum-action problem: minimise the discrete action over paths on
/// `[-T, 0]` from rest at the start set to the target, letting `T` grow.
#[derive(Debug, Clone)]
pub struct MamProblem {
    pub cfg: SpectralConfig,
    pub b: Nonlinearity,
    pub equation: Equation,
    pub target: Field,
    /// Ignored for the heat equation.
    pub velocity: EndpointVelocity,
    pub start: Start,
    pub options: MamOptions,
}

impl MamProblem {
    pub fn heat(cfg: &SpectralConfig, b: &Nonlinearity, target: Field) -> Self {
        Self {
            cfg: cfg.clone(),
            b: b.clone(),
            equation: Equation::Heat,
            target,
            velocity: EndpointVelocity::Free,
            start: Start::Origin,
            options: MamOptions::default(),
        }
    }

    pub fn wave(
        cfg: &SpectralConfig,
        b: &Nonlinearity,
        mu: f64,
        target: Field,
        velocity: EndpointVelocity,
    ) -> Self {
        Self {
            cfg: cfg.clone(),
            b: b.clone(),
            equation: Equation::Wave { mu },
            target,
            velocity,
            start: Start::Origin,
            options: MamOptions::default(),
        }
    }

    pub fn with_options(mut self, options: MamOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_start(mut self, start: Start) -> Self {
        self.start = start;
        self
    }

    fn step(&self) -> f64 {
        self.options.dt.unwrap_or_else(|| {
            let top = *self.cfg.eigenvalues().last().expect("at least one mode");
            let h = 0.25 / top;
            match self.equation {
                Equation::Heat => h,
                Equation::Wave { mu } => h.min(mu / 16.0),
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let k = self.cfg.modes();
        self.target.check_len(k)?;
        if let Equation::Wave { mu } = self.equation {
            check_mass(mu)?;
            if let EndpointVelocity::Fixed(y) = &self.velocity {
                y.check_len(k)?;
            }
        }
        if let Start::Ball { radius } = self.start {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(invalid("start.radius", "must be a positive real"));
            }
        }
        let o = &self.options;
        let h = self.step();
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("dt", "must be a positive real"));
        }
        if !(o.initial_horizon > 0.0 && o.max_horizon >= o.initial_horizon) {
            return Err(invalid(
                "initial_horizon",
                "must be positive and at most max_horizon",
            ));
        }
        if ((o.initial_horizon / h).round() as usize) < 16 {
            return Err(invalid(
                "dt",
                "the initial horizon must span at least 16 steps",
            ));
        }
        Ok(())
    }
}

/// Outcome of [`mam_minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamResult {
    pub action: f64,
    pub path: Path,
    pub converged: bool,
    pub iterations: usize,
    /// `(T, action)` at every horizon visited.
    pub horizon_ladder: Vec<(f64, f64)>,
}

impl MamResult {
    /// Velocity at the end of the path (zero for the heat equation).
    pub fn terminal_velocity(&self) -> Field {
        self.path.last().v
    }
}

struct Objective<'a> {
    problem: &'a MamProblem,
    stencil: Stencil,
    mu: Option<f64>,
    free: Vec<usize>,
    precond: Vec<BandedCholesky>,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a MamProblem, n: usize, h: f64) -> Result<Self> {
        let mu = problem.equation.mass();
        let stencil = match mu {
            Some(_) => Stencil::new(n, h, Ends::Ghost, true),
            None => Stencil::midpoint(n, h),
        };
        let mut free = Vec::new();
        if matches!(problem.start, Start::Ball { .. }) {
            free.push(node(0));
        }
        free.extend((1..n).map(node));
        if mu.is_some() && problem.velocity == EndpointVelocity::Free {
            free.push(v_end(n));
        }
        let mut obj = Self {
            problem,
            stencil,
            mu,
            free,
            precond: Vec::new(),
        };
        obj.precond = obj.assemble_preconditioner()?;
        Ok(obj)
    }

    /// Hessian of the action linearised at `0`, one banded block per mode.
    fn assemble_preconditioner(&self) -> Result<Vec<BandedCholesky>> {
        let cfg = &self.problem.cfg;
        let k = cfg.modes();
        let slope = self.problem.b.linearization_diagonal(k);
        let mut index = vec![usize::MAX; self.stencil.vars()];
        for (f, &var) in self.free.iter().enumerate() {
            index[var] = f;
        }
        (0..k)
            .map(|m| {
                let shift = cfg.eigenvalues()[m] - slope[m];
                let inv_l2 = 1.0 / (cfg.noise()[m] * cfg.noise()[m]);
                let mut h = Banded::zeros(self.free.len(), 3);
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(8);
                for i in 0..self.stencil.weights.len() {
                    row.clear();
                    row.extend_from_slice(&self.stencil.d1[i]);
                    if let Some(mu) = self.mu {
                        row.extend(self.stencil.d2[i].iter().map(|&(j, c)| (j, mu * c)));
                    }
                    row.extend(self.stencil.state[i].iter().map(|&(j, c)| (j, shift * c)));
                    let w = self.stencil.weights[i] * inv_l2;
                    for &(a, ca) in &row {
                        let fa = index[a];
                        if fa == usize::MAX {
                            continue;
                        }
                        for &(bv, cb) in &row {
                            let fb = index[bv];
                            if fb == usize::MAX || fb > fa {
                                continue;
                            }
                            h.add(fa, fb, w * ca * cb);
                        }
                    }
                }
                // a touch of diagonal loading guards against round-off
                for f in 0..self.free.len() {
                    let d = h.get(f, f);
                    h.add(f, f, 1e-13 * d.abs());
                }
                let _ = h.bandwidth();
                h.factor()
            })
            .collect()
    }

    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let cfg = &self.problem.cfg;
        let k = cfg.modes();
        let r = residual(&self.stencil, self.mu, cfg, &self.problem.b, x);
        let s = quadratic_action(&self.stencil, cfg, &r);
        let lam = cfg.noise();
        let alpha = cfg.eigenvalues();
        let mut y = r;
        for (i, w) in self.stencil.weights.iter().enumerate() {
            for m in 0..k {
                y[i * k + m] *= w / (lam[m] * lam[m]);
            }
        }
        let mut grad = vec![0.0; x.len()];
        Stencil::apply_transpose(&self.stencil.d1, &y, k, 1.0, &mut grad);
        if let Some(mu) = self.mu {
            Stencil::apply_transpose(&self.stencil.d2, &y, k, mu, &mut grad);
        }
        let states = Stencil::apply(&self.stencil.state, x, k);
        let mut jt = vec![0.0; k];
        let mut z = vec![0.0; y.len()];
        for (i, phi) in states.chunks(k).enumerate() {
            let yi = &y[i * k..(i + 1) * k];
            self.problem.b.jacobian_transpose_apply(phi, yi, &mut jt);
            for m in 0..k {
                z[i * k + m] = alpha[m] * yi[m] - jt[m];
            }
        }
        Stencil::apply_transpose(&self.stencil.state, &z, k, 1.0, &mut grad);
        (s, grad)
    }

    /// Unit outward normal at the start node when the ball constraint is
    /// active, laid out like the unknowns.
    fn active_normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        let Start::Ball { radius } = self.problem.start else {
            return None;
        };
        let k = self.problem.cfg.modes();
        let p = &x[node(0) * k..(node(0) + 1) * k];
        let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < radius * (1.0 - 1e-12) || norm == 0.0 {
            return None;
        }
        let mut c = vec![0.0; x.len()];
        for (ci, pi) in c[node(0) * k..(node(0) + 1) * k].iter_mut().zip(p) {
            *ci = pi / norm;
        }
        Some(c)
    }

    /// `-P⁻¹g`, or at an active ball constraint whose multiplier has the
    /// right sign, its projection onto `cᵀd = 0` in the `P` metric:
    /// `d = -P⁻¹g + P⁻¹c (cᵀP⁻¹g)/(cᵀP⁻¹c)`, still a descent direction.
    fn search_direction(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let mut d = self.direction(g);
        if let Some(c) = self.active_normal(x) {
            let outward: f64 = c.iter().zip(&d).map(|(a, b)| a * b).sum();
            if outward > 0.0 {
                let pc: Vec<f64> = self.direction(&c).iter().map(|v| -v).collect();
                let cpc: f64 = c.iter().zip(&pc).map(|(a, b)| a * b).sum();
                if cpc > 0.0 {
                    let scale = outward / cpc;
                    d.iter_mut().zip(&pc).for_each(|(di, pi)| *di -= scale * pi);
                }
            }
        }
        d
    }

    fn project(&self, x: &mut [f64]) {
        if let Start::Ball { radius } = self.problem.start {
            let k = self.problem.cfg.modes();
            let p = &mut x[node(0) * k..(node(0) + 1) * k];
            let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > radius {
                p.iter_mut().for_each(|c| *c *= radius / norm);
            }
        }
    }

    /// `-P⁻¹ g` restricted to the free variables, scattered back.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let k = self.problem.cfg.modes();
        let mut d = vec![0.0; g.len()];
        let mut buf = vec![0.0; self.free.len()];
        for m in 0..k {
            for (f, &var) in self.free.iter().enumerate() {
                buf[f] = g[var * k + m];
            }
            self.precond[m].solve_in_place(&mut buf);
            for (f, &var) in self.free.iter().enumerate() {
                d[var * k + m] = -buf[f];
            }
        }
        d
    }

    /// Preconditioned descent with Barzilai–Borwein step seeding and
    /// Armijo backtracking; every accepted step lowers the action.
    fn minimize(&self, x: &mut Vec<f64>, max_iters: usize, tol: f64) -> (f64, usize, bool) {
        self.project(x);
        let (mut s, mut g) = self.eval(x);
        let mut step = 1.0;
        for it in 0..max_iters {
            let d = self.search_direction(x, &g);
            let dec: f64 = -d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            if 0.5 * dec <= tol * (1.0 + s) {
                return (s, it, true);
            }
            let mut t = step;
            loop {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                self.project(&mut xn);
                let (sn, gn) = self.eval(&xn);
                if sn.is_finite() && sn <= s - 1e-4 * t * dec {
                    let curvature: f64 = d
                        .iter()
                        .zip(gn.iter().zip(&g))
                        .map(|(a, (p, q))| a * (p - q))
                        .sum();
                    step = if curvature > 0.0 {
                        (t * dec / curvature).clamp(1e-4, 10.0)
                    } else {
                        1.0
                    };
                    *x = xn;
                    s = sn;
                    g = gn;
                    break;
                }
                t *= 0.5;
                if t < 1e-14 {
                    // no further decrease is representable
                    return (s, it, 0.5 * dec <= 1e3 * tol * (1.0 + s));
                }
            }
        }
        let d = self.search_direction(x, &g);
        let dec: f64 = -d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        (s, max_iters, 0.5 * dec <= tol * (1.0 + s))
    }
}

/// Fewest steps a ball-start path is shortened to.
const MIN_BALL_STEPS: usize = 16;

/// Minimum of the discrete action `I^μ` (or `I`) over paths from rest at
/// the start set at `-T` to the target at `0`, with the horizon doubled
/// until the action settles. A ball start is not monotone in `T`, so its
/// horizon is first halved, then doubled, while the action drops; the
/// result keeps the best horizon seen.
pub fn mam_minimize(problem: &MamProblem) -> Result<MamResult> {
    problem.validate()?;
    let k = problem.cfg.modes();
    let h = problem.step();
    let opts = problem.options;
    let mut n = (opts.initial_horizon / h).round() as usize;
    let wave = problem.equation.mass().is_some();

    // linear interpolation from 0 to the target
    let mut x = vec![0.0; (n + 3) * k];
    for i in 0..=n {
        let s = i as f64 / n as f64;
        for m in 0..k {
            x[node(i) * k + m] = s * problem.target[m];
        }
    }
    if let (true, EndpointVelocity::Fixed(y)) = (wave, &problem.velocity) {
        x[v_end(n) * k..(v_end(n) + 1) * k].copy_from_slice(y.coeffs());
    }

    let mut ladder = Vec::new();
    let mut iterations = 0;
    let mut all_converged = true;
    let mut settled = false;
    let mut solve = |n: usize, x: &mut Vec<f64>, ladder: &mut Vec<(f64, f64)>| -> Result<f64> {
        let objective = Objective::new(problem, n, h)?;
        let (s, it, ok) = objective.minimize(x, opts.max_iters, opts.tolerance);
        iterations += it;
        all_converged &= ok;
        ladder.push((n as f64 * h, s));
        Ok(s)
    };

    let mut s = solve(n, &mut x, &mut ladder)?;
    // From a ball the action is not monotone in T: the cheapest path leaves
    // the boundary at a finite horizon. Shorten first, keeping the tail.
    let mut shortened = false;
    if matches!(problem.start, Start::Ball { .. }) {
        while n / 2 >= MIN_BALL_STEPS {
            let half = n / 2;
            let mut y = vec![0.0; (half + 3) * k];
            y[..k].copy_from_slice(&x[..k]);
            y[node(0) * k..].copy_from_slice(&x[node(n - half) * k..]);
            let sy = solve(half, &mut y, &mut ladder)?;
            if sy >= s {
                settled = true;
                break;
            }
            shortened = true;
            (n, x, s) = (half, y, sy);
        }
        settled |= n / 2 < MIN_BALL_STEPS;
    }
    if !shortened {
        loop {
            let horizon = n as f64 * h;
            if 2.0 * horizon > opts.max_horizon * (1.0 + 1e-12) {
                break;
            }
            // pad with n nodes at rest at the start of the path
            let mut padded = vec![0.0; (2 * n + 3) * k];
            if let Start::Ball { .. } = problem.start {
                let first = x[node(0) * k..(node(0) + 1) * k].to_vec();
                for i in 0..n {
                    padded[node(i) * k..(node(i) + 1) * k].copy_from_slice(&first);
                }
            }
            padded[node(n) * k..(v_end(2 * n)) * k].copy_from_slice(&x[node(0) * k..v_end(n) * k]);
            padded[v_end(2 * n) * k..].copy_from_slice(&x[v_end(n) * k..]);
            let sp = solve(2 * n, &mut padded, &mut ladder)?;
            if (sp - s).abs() <= opts.horizon_rel_tol * s.abs() + 1e-14 {
                (n, x, s) = (2 * n, padded, sp);
                settled = true;
                break;
            }
            if sp > s && matches!(problem.start, Start::Ball { .. }) {
                // the longer horizon is worse, keep the shorter one
                settled = true;
                break;
            }
            (n, x, s) = (2 * n, padded, sp);
        }
    }
    ladder.sort_by(|a, b| a.0.total_cmp(&b.0));

    let horizon = n as f64 * h;
    let grid = TimeGrid::new(-horizon, 0.0, n)?;
    let u: Vec<Field> = (0..=n)
        .map(|i| Field::new(x[node(i) * k..(node(i) + 1) * k].to_vec()))
        .collect::<Result<_>>()?;
    let path = if wave {
        let v = (0..=n)
            .map(|i| {
                let c: Vec<f64> = if i == 0 {
                    x[v_start() * k..(v_start() + 1) * k].to_vec()
                } else if i == n {
                    x[v_end(n) * k..(v_end(n) + 1) * k].to_vec()
                } else {
                    (0..k)
                        .map(|m| (u[i + 1][m] - u[i - 1][m]) / (2.0 * h))
                        .collect()
                };
                Field::new(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Path::wave(grid, u, v)?
    } else {
        Path::heat(grid, u)?
    };
    let action = s;
    Ok(MamResult {
        action,
        path,
        converged: all_converged && settled,
        iterations,
        horizon_ladder: ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(problem: &MamProblem, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 20;
        let obj = Objective::new(problem, n, 0.05).unwrap();
        let k = problem.cfg.modes();
        let x: Vec<f64> = (0..(n + 3) * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = obj.eval(&x);
        for &var in &obj.free {
            for m in 0..k {
                let i = var * k + m;
                let eps = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += eps;
                xm[i] -= eps;
                let fd = (obj.eval(&xp).0 - obj.eval(&xm).0) / (2.0 * eps);
                assert!(
                    (fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "var {var} mode {m}: {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = SpectralConfig::new(std::f64::consts::PI, 3, 0.5, 1.0, 1).unwrap();
        let b = Nonlinearity::Sum(vec![
            Nonlinearity::sine(&cfg, 0.4).unwrap(),
            Nonlinearity::linear_per_mode(vec![0.2]),
        ]);
        let target = Field::mode(3, 0, 1.0);
        check_gradient(&MamProblem::heat(&cfg, &b, target.clone()), 1);
        check_gradient(
            &MamProblem::wave(&cfg, &b, 0.3, target.clone(), EndpointVelocity::Free),
            2,
        );
        check_gradient(
            &MamProblem::wave(
                &cfg,
                &b,
                0.3,
                target,
                EndpointVelocity::Fixed(Field::mode(3, 1, 1.0)),
            )
            .with_start(Start::Ball { radius: 0.1 }),
            3,
        );
    }

    #[test]
    fn zero_target_has_zero_action() {
        let cfg = SpectralConfig::white_noise(4).unwrap();
        let r = mam_minimize(&MamProblem::heat(
            &cfg,
            &Nonlinearity::Zero,
            Field::zeros(4),
        ))
        .unwrap();
        assert_eq!(r.action, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn linear_heat_quasipotential() {
        let cfg = SpectralConfig::white_noise(4).unwrap();
        let r = mam_minimize(&MamProblem::heat(
            &cfg,
            &Nonlinearity::Zero,
            Field::mode(4, 0, 1.0),
        ))
        .unwrap();
        assert!(r.converged);
        assert!((r.action - 1.0).abs() < 0.02, "{}", r.action);
        assert_eq!(
            r.path.position(r.path.grid().n_steps()),
            &Field::mode(4, 0, 1.0)
        );
    }
}
