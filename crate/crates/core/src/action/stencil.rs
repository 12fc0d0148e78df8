//! Finite-difference operators on a uniform path grid.
//!
//! Unknowns are laid out as `[v_0, φ_0, …, φ_n, v_n]` so that endpoint
//! velocities can enter the stencils as ordinary variables. Each node row
//! lists `(variable, weight)` pairs.

use crate::quadrature::trapezoid_weights;
use crate::spectral::{Nonlinearity, SpectralConfig};

pub(crate) type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ends {
    /// Second-order one-sided differences at the end nodes.
    OneSided,
    /// `φ'` at the ends is the stored velocity; `φ''` uses a ghost node
    /// reflecting that velocity, so all stencils stay central.
    Ghost,
}

#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub n: usize,
    pub d1: Vec<Row>,
    pub d2: Vec<Row>,
    /// The state at which `A` and `B` are evaluated, per residual row.
    pub state: Vec<Row>,
    pub weights: Vec<f64>,
}

pub(crate) fn node(i: usize) -> usize {
    i + 1
}

pub(crate) fn v_start() -> usize {
    0
}

pub(crate) fn v_end(n: usize) -> usize {
    n + 2
}

impl Stencil {
    /// `n` intervals of width `h`; `second` requests `φ''` rows.
    pub fn new(n: usize, h: f64, ends: Ends, second: bool) -> Self {
        let mut d1 = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let row = if i == 0 {
                match ends {
                    Ends::Ghost => vec![(v_start(), 1.0)],
                    Ends::OneSided => {
                        vec![(node(0), -1.5 / h), (node(1), 2.0 / h), (node(2), -0.5 / h)]
                    }
                }
            } else if i == n {
                match ends {
                    Ends::Ghost => vec![(v_end(n), 1.0)],
                    Ends::OneSided => vec![
                        (node(n), 1.5 / h),
                        (node(n - 1), -2.0 / h),
                        (node(n - 2), 0.5 / h),
                    ],
                }
            } else {
                vec![(node(i + 1), 0.5 / h), (node(i - 1), -0.5 / h)]
            };
            d1.push(row);
        }
        let mut d2 = Vec::new();
        if second {
            let h2 = h * h;
            for i in 0..=n {
                let row = if i == 0 {
                    match ends {
                        // ghost φ_{-1} = φ_1 - 2h v_0
                        Ends::Ghost => vec![
                            (node(1), 2.0 / h2),
                            (node(0), -2.0 / h2),
                            (v_start(), -2.0 / h),
                        ],
                        Ends::OneSided => vec![
                            (node(0), 2.0 / h2),
                            (node(1), -5.0 / h2),
                            (node(2), 4.0 / h2),
                            (node(3), -1.0 / h2),
                        ],
                    }
                } else if i == n {
                    match ends {
                        // ghost φ_{n+1} = φ_{n-1} + 2h v_n
                        Ends::Ghost => vec![
                            (node(n - 1), 2.0 / h2),
                            (node(n), -2.0 / h2),
                            (v_end(n), 2.0 / h),
                        ],
                        Ends::OneSided => vec![
                            (node(n), 2.0 / h2),
                            (node(n - 1), -5.0 / h2),
                            (node(n - 2), 4.0 / h2),
                            (node(n - 3), -1.0 / h2),
                        ],
                    }
                } else {
                    vec![
                        (node(i - 1), 1.0 / h2),
                        (node(i), -2.0 / h2),
                        (node(i + 1), 1.0 / h2),
                    ]
                };
                d2.push(row);
            }
        }
        Self {
            n,
            d1,
            d2,
            state: (0..=n).map(|i| vec![(node(i), 1.0)]).collect(),
            weights: trapezoid_weights(n, h),
        }
    }

    /// First-order residuals at the interval midpoints:
    /// `(φ_{i+1} - φ_i)/h` paired with the state `(φ_i + φ_{i+1})/2`,
    /// integrated by the midpoint rule. Second order, without the
    /// odd-even decoupling of central differences.
    pub fn midpoint(n: usize, h: f64) -> Self {
        Self {
            n,
            d1: (0..n)
                .map(|i| vec![(node(i + 1), 1.0 / h), (node(i), -1.0 / h)])
                .collect(),
            d2: Vec::new(),
            state: (0..n)
                .map(|i| vec![(node(i), 0.5), (node(i + 1), 0.5)])
                .collect(),
            weights: vec![h; n],
        }
    }

    pub fn vars(&self) -> usize {
        self.n + 3
    }

    /// Applies the rows to the extended unknowns `x[var * K + k]`.
    pub fn apply(rows: &[Row], x: &[f64], modes: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows.len() * modes];
        for (i, row) in rows.iter().enumerate() {
            let o = &mut out[i * modes..(i + 1) * modes];
            for &(j, c) in row {
                let xj = &x[j * modes..(j + 1) * modes];
                for k in 0..modes {
                    o[k] += c * xj[k];
                }
            }
        }
        out
    }

    /// Adds `Σ_i rowsᵀ y_i` into `grad`.
    pub fn apply_transpose(rows: &[Row], y: &[f64], modes: usize, scale: f64, grad: &mut [f64]) {
        for (i, row) in rows.iter().enumerate() {
            let yi = &y[i * modes..(i + 1) * modes];
            for &(j, c) in row {
                let g = &mut grad[j * modes..(j + 1) * modes];
                for k in 0..modes {
                    g[k] += scale * c * yi[k];
                }
            }
        }
    }
}

/// Residual `μφ'' + φ' - Aφ - B(φ)` (heat: `φ' - Aφ - B(φ)`) at every
/// node, with `-A` acting as multiplication by `α_k`.
pub(crate) fn residual(
    stencil: &Stencil,
    mu: Option<f64>,
    cfg: &SpectralConfig,
    b: &Nonlinearity,
    x: &[f64],
) -> Vec<f64> {
    let k = cfg.modes();
    let mut r = Stencil::apply(&stencil.d1, x, k);
    if let Some(mu) = mu {
        let d2 = Stencil::apply(&stencil.d2, x, k);
        for (ri, di) in r.iter_mut().zip(d2) {
            *ri += mu * di;
        }
    }
    let alpha = cfg.eigenvalues();
    let states = Stencil::apply(&stencil.state, x, k);
    let mut bx = vec![0.0; k];
    for (i, phi) in states.chunks(k).enumerate() {
        b.apply_into(phi, &mut bx);
        let ri = &mut r[i * k..(i + 1) * k];
        for m in 0..k {
            ri[m] += alpha[m] * phi[m] - bx[m];
        }
    }
    r
}

/// `½ Σ_i w_i |Q^{-1} r_i|²`.
pub(crate) fn quadratic_action(stencil: &Stencil, cfg: &SpectralConfig, r: &[f64]) -> f64 {
    let k = cfg.modes();
    let lam = cfg.noise();
    0.5 * stencil
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            w * r[i * k..(i + 1) * k]
                .iter()
                .zip(lam)
                .map(|(x, l)| (x / l) * (x / l))
                .sum::<f64>()
        })
        .sum::<f64>()
}
