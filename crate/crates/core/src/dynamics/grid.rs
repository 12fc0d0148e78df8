use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::trapezoid_weights;
use crate::spectral::{Field, PhasePoint, SpectralConfig};

/// Uniform time grid `t_i = t_start + i·dt`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid on `[t_start, t_end]` with `n_steps` equal steps.
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::NonFinite("time grid bounds"));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "at least one step is required"));
        }
        if t_end <= t_start {
            return Err(invalid("t_end", "must exceed t_start"));
        }
        Ok(Self {
            t_start,
            t_end,
            dt: (t_end - t_start) / n_steps as f64,
            n_steps,
        })
    }

    /// Grid starting at `t_start` with step `dt`.
    pub fn with_step(t_start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be a positive real"));
        }
        Self::new(t_start, t_start + dt * n_steps as f64, n_steps)
    }

    /// Grid on `[0, t_end]` whose step is at most `max_dt`.
    pub fn covering(t_end: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) {
            return Err(invalid("dt", "must be a positive real"));
        }
        Self::new(0.0, t_end, (t_end / max_dt).ceil().max(1.0) as usize)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.time(i))
    }

    /// The same interval with twice as many steps.
    pub fn refined(&self) -> Self {
        Self::new(self.t_start, self.t_end, 2 * self.n_steps).expect("refining a valid grid")
    }
}

/// A trajectory sampled on every node of a [`TimeGrid`]: positions for the
/// heat equation, positions and velocities for the wave equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    grid: TimeGrid,
    u: Vec<Field>,
    v: Option<Vec<Field>>,
}

impl Path {
    pub fn heat(grid: TimeGrid, u: Vec<Field>) -> Result<Self> {
        Self::checked(grid, u, None)
    }

    pub fn wave(grid: TimeGrid, u: Vec<Field>, v: Vec<Field>) -> Result<Self> {
        Self::checked(grid, u, Some(v))
    }

    /// Samples `f(t)` on the grid as a heat path.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Field) -> Result<Self> {
        Self::heat(grid, grid.times().map(f).collect())
    }

    fn checked(grid: TimeGrid, u: Vec<Field>, v: Option<Vec<Field>>) -> Result<Self> {
        if u.len() != grid.nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.nodes(),
                got: u.len(),
            });
        }
        let modes = u[0].len();
        for x in u.iter().chain(v.iter().flatten()) {
            x.check_len(modes)?;
            if !x.is_finite() {
                return Err(Error::NonFinite("path states"));
            }
        }
        if let Some(v) = &v {
            if v.len() != u.len() {
                return Err(Error::DimensionMismatch {
                    expected: u.len(),
                    got: v.len(),
                });
            }
        }
        Ok(Self { grid, u, v })
    }

    pub(crate) fn from_parts_unchecked(
        grid: TimeGrid,
        u: Vec<Field>,
        v: Option<Vec<Field>>,
    ) -> Self {
        Self { grid, u, v }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.u[0].len()
    }

    pub fn is_wave(&self) -> bool {
        self.v.is_some()
    }

    pub fn positions(&self) -> &[Field] {
        &self.u
    }

    pub fn velocities(&self) -> Option<&[Field]> {
        self.v.as_deref()
    }

    pub fn position(&self, i: usize) -> &Field {
        &self.u[i]
    }

    /// The phase point at node `i`; heat paths report zero velocity.
    pub fn state(&self, i: usize) -> PhasePoint {
        PhasePoint {
            u: self.u[i].clone(),
            v: match &self.v {
                Some(v) => v[i].clone(),
                None => Field::zeros(self.modes()),
            },
        }
    }

    pub fn last(&self) -> PhasePoint {
        self.state(self.grid.n_steps())
    }

    /// `sup_i |u(t_i) - other(t_i)|_H`; both paths must share the grid.
    pub fn sup_distance(&self, other: &Path) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `sup_i |u(t_i)|_H`.
    pub fn sup_position_norm(&self) -> f64 {
        self.u.iter().map(Field::norm).fold(0.0, f64::max)
    }

    /// `sup_i |z(t_i)|_ℋ`.
    pub fn sup_energy_norm(&self, cfg: &SpectralConfig) -> f64 {
        (0..self.grid.nodes())
            .map(|i| self.state(i).energy_norm(cfg))
            .fold(0.0, f64::max)
    }

    /// Every other node, i.e. the path on a grid with half the steps.
    /// Requires an even number of steps.
    pub fn coarsened(&self) -> Result<Path> {
        let n = self.grid.n_steps();
        if !n.is_multiple_of(2) {
            return Err(invalid("path", "coarsening needs an even number of steps"));
        }
        let grid = TimeGrid::new(self.grid.t_start(), self.grid.t_end(), n / 2)?;
        let pick = |xs: &Vec<Field>| xs.iter().step_by(2).cloned().collect::<Vec<_>>();
        Ok(Path {
            grid,
            u: pick(&self.u),
            v: self.v.as_ref().map(pick),
        })
    }
}

/// A control `ψ` sampled on the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    grid: TimeGrid,
    values: Vec<Field>,
}

impl Control {
    pub fn new(grid: TimeGrid, values: Vec<Field>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.nodes(),
                got: values.len(),
            });
        }
        let modes = values[0].len();
        for x in &values {
            x.check_len(modes)?;
            if !x.is_finite() {
                return Err(Error::NonFinite("control values"));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid, modes: usize) -> Self {
        Self {
            grid,
            values: vec![Field::zeros(modes); grid.nodes()],
        }
    }

    /// Constant control `ψ(t) = value`.
    pub fn constant(grid: TimeGrid, value: Field) -> Self {
        Self {
            grid,
            values: vec![value; grid.nodes()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Field] {
        &self.values
    }

    pub fn modes(&self) -> usize {
        self.values[0].len()
    }

    /// `½ ∫ |ψ(t)|²_H dt` by the trapezoidal rule.
    pub fn energy(&self) -> f64 {
        let w = trapezoid_weights(self.grid.n_steps(), self.grid.dt());
        0.5 * self
            .values
            .iter()
            .zip(&w)
            .map(|(x, w)| w * x.dot(x))
            .sum::<f64>()
    }

    /// Applies a per-mode multiplier to every value.
    pub fn map_modes(&self, multiplier: &[f64]) -> Control {
        let values = self
            .values
            .iter()
            .map(|x| {
                Field::from_vec_unchecked(
                    x.coeffs()
                        .iter()
                        .zip(multiplier)
                        .map(|(c, m)| c * m)
                        .collect(),
                )
            })
            .collect();
        Control {
            grid: self.grid,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_end_is_consistent() {
        let g = TimeGrid::with_step(-3.0, 1e-3, 7000).unwrap();
        assert!((g.t_end() - (g.t_start() + g.n_steps() as f64 * g.dt())).abs() < 1e-12);
        assert_eq!(g.times().count(), 7001);
        assert_eq!(g.time(7000), g.t_end());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::with_step(0.0, -1.0, 3).is_err());
    }

    #[test]
    fn path_length_is_checked() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(Path::heat(g, vec![Field::zeros(2); 4]).is_err());
        assert!(Path::heat(g, vec![Field::zeros(2); 5]).is_ok());
    }

    #[test]
    fn constant_control_energy() {
        let g = TimeGrid::new(0.0, 3.0, 30).unwrap();
        let c = Control::constant(g, Field::mode(2, 0, 2.0));
        assert!((c.energy() - 6.0).abs() < 1e-12);
    }
}
