//! Independent brute-force references for the time steppers.
//!
//! Three oracles live here:
//!
//! * [`duhamel_reference`] solves the exact one-step Duhamel system by Picard
//!   iteration on composite Gauss-Legendre nodes;
//! * [`quad_integral`] evaluates each oscillatory integral appearing in the
//!   scheme derivations by direct (nested) quadrature, with every propagator
//!   applied as an exact multiplier at each node;
//! * [`resolved_reference`] is a classical Lawson-RK4 integrator on the
//!   Fourier coefficient ODE system with the linear parts factored out,
//!   feasible for small `c` only and used to certify the other two.
//!
//! Panels are sized so that the fastest phase `e^{i s c^2}` turns by at most
//! half a radian per panel, which keeps every integrand slowly varying inside
//! a panel. Partial integrals `int_0^s` at the quadrature nodes are taken by
//! expanding the panel's node values in the Legendre basis and integrating
//! that expansion exactly, so no iterate is ever re-interpolated at new
//! nodes. The oracles are only required at small `c` (<= 32): the closed
//! forms they certify carry their entire `c`-dependence inside symbol
//! arguments, and the large-`c` behaviour is pinned separately by the
//! asymptotic consistency checks.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::initial_data::KgsState;
use crate::integrators::StepParams;
use crate::parallel::indexed_map;
use crate::symbol::{BaseKind, CParam, Symbol};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration from the Chebyshev initial guess.
    pub fn new(q: usize) -> Result<GaussLegendre> {
        if q < 2 {
            return Err(Error::InvalidParam(format!("quadrature needs >= 2 points, got {q}")));
        }
        let mut nodes = vec![0.0; q];
        let mut weights = vec![0.0; q];
        for i in 0..q {
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(q, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(q, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Matrix taking node values to partial integrals: row `j` gives
    /// `int_{-1}^{x_j} f` from the values `f(x_i)`, by exact integration of
    /// the degree q-1 Legendre expansion fitted through the nodes.
    fn partial_matrix(&self) -> Vec<Vec<f64>> {
        let q = self.nodes.len();
        // coefficient extraction: a_l = (2l+1)/2 sum_i w_i P_l(x_i) f_i
        let mut p_at = vec![vec![0.0; q]; q + 1]; // p_at[l][i] = P_l(x_i)
        for (i, &x) in self.nodes.iter().enumerate() {
            p_at[0][i] = 1.0;
            p_at[1][i] = x;
            for l in 2..=q {
                let lf = l as f64;
                p_at[l][i] =
                    ((2.0 * lf - 1.0) * x * p_at[l - 1][i] - (lf - 1.0) * p_at[l - 2][i]) / lf;
            }
        }
        // antiderivatives: int_{-1}^x P_0 = x + 1; for l >= 1,
        // int_{-1}^x P_l = (P_{l+1}(x) - P_{l-1}(x)) / (2l + 1)
        let mut mat = vec![vec![0.0; q]; q];
        for (j, row) in mat.iter_mut().enumerate() {
            let xj = self.nodes[j];
            for i in 0..q {
                let mut acc = 0.0;
                for l in 0..q {
                    let al = (2.0 * l as f64 + 1.0) / 2.0 * self.weights[i] * p_at[l][i];
                    let int_l = if l == 0 {
                        xj + 1.0
                    } else {
                        (p_at[l + 1][j] - p_at[l - 1][j]) / (2.0 * l as f64 + 1.0)
                    };
                    acc += al * int_l;
                }
                row[i] = acc;
            }
        }
        mat
    }
}

/// Quadrature and Picard controls for the Duhamel oracles.
#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    /// Gauss-Legendre points per panel (>= 4).
    pub quad_points: usize,
    /// Composite panels over [0, tau]; must satisfy `c^2 tau / panels <= 0.5`.
    pub panels: usize,
    /// Picard iteration cap (>= 3).
    pub picard_iters: usize,
    /// H^1 contraction tolerance on successive endpoint iterates.
    pub tol: f64,
}

impl OracleConfig {
    pub fn new(quad_points: usize, panels: usize, picard_iters: usize, tol: f64) -> Result<Self> {
        if quad_points < 4 {
            return Err(Error::InvalidParam(format!("quad_points must be >= 4, got {quad_points}")));
        }
        if panels == 0 {
            return Err(Error::InvalidParam("panels must be positive".into()));
        }
        if picard_iters < 3 {
            return Err(Error::InvalidParam(format!(
                "picard_iters must be >= 3, got {picard_iters}"
            )));
        }
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::InvalidParam(format!("tol must be positive, got {tol}")));
        }
        Ok(OracleConfig { quad_points, panels, picard_iters, tol })
    }

    /// Default configuration resolving the fastest phase of the given step:
    /// enough panels that `c^2 tau / panels <= 0.5`.
    pub fn for_params(p: &StepParams) -> OracleConfig {
        let needed = (p.c.squared() * p.tau / 0.5).ceil() as usize;
        OracleConfig {
            quad_points: 8,
            panels: needed.max(4),
            picard_iters: 24,
            tol: 1e-12,
        }
    }

    fn validate_phase(&self, p: &StepParams) -> Result<()> {
        let per_panel = p.c.squared() * p.tau / self.panels as f64;
        if per_panel > 0.5 + 1e-12 {
            return Err(Error::PhaseResolution(per_panel));
        }
        Ok(())
    }
}

/// Composite panel layout with per-node propagator tables.
struct NodeTables {
    /// Node positions in [0, tau], panel-major.
    s: Vec<f64>,
    /// Full-integral weight per node (panel Gauss weight scaled by h/2).
    full_w: Vec<f64>,
    /// Partial-integration matrix scaled by h/2.
    partial: Vec<Vec<f64>>,
    q: usize,
    panels: usize,
    /// e^{+- i s c<nabla>_c} and e^{+- i s Delta/2} at every node.
    exp_cn_pos: Vec<Symbol>,
    exp_cn_neg: Vec<Symbol>,
    exp_hl_pos: Vec<Symbol>,
    exp_hl_neg: Vec<Symbol>,
}

impl NodeTables {
    fn build(grid: &Grid, p: &StepParams, cfg: &OracleConfig) -> NodeTables {
        let rule = GaussLegendre::new(cfg.quad_points).expect("validated");
        let q = cfg.quad_points;
        let panels = cfg.panels;
        let h = p.tau / panels as f64;
        let mut s = Vec::with_capacity(panels * q);
        let mut full_w = Vec::with_capacity(panels * q);
        for pa in 0..panels {
            let a = pa as f64 * h;
            for i in 0..q {
                s.push(a + 0.5 * h * (rule.nodes[i] + 1.0));
                full_w.push(0.5 * h * rule.weights[i]);
            }
        }
        let partial = rule
            .partial_matrix()
            .into_iter()
            .map(|row| row.into_iter().map(|v| 0.5 * h * v).collect())
            .collect();

        let c = p.c;
        let c2 = c.squared();
        let cn: Vec<f64> = grid.k_squared().iter().map(|&k2| c.value() * (c2 + k2).sqrt()).collect();
        let hl: Vec<f64> = grid.k_squared().iter().map(|&k2| -0.5 * k2).collect();
        let mk = |phase: &Vec<f64>, sj: f64, sign: f64| {
            Symbol::from_fn(grid, |i| Complex64::cis(sign * sj * phase[i]))
        };
        let exp_cn_pos = s.iter().map(|&sj| mk(&cn, sj, 1.0)).collect();
        let exp_cn_neg = s.iter().map(|&sj| mk(&cn, sj, -1.0)).collect();
        let exp_hl_pos = s.iter().map(|&sj| mk(&hl, sj, 1.0)).collect();
        let exp_hl_neg = s.iter().map(|&sj| mk(&hl, sj, -1.0)).collect();

        NodeTables { s, full_w, partial, q, panels, exp_cn_pos, exp_cn_neg, exp_hl_pos, exp_hl_neg }
    }

    fn node_count(&self) -> usize {
        self.s.len()
    }

    /// `int_0^tau f` from per-node integrand values.
    fn full_integral(&self, grid: &Arc<Grid>, f: &[Field]) -> Field {
        let mut acc = vec![Complex64::default(); grid.modes()];
        for (j, fj) in f.iter().enumerate() {
            let w = self.full_w[j];
            for (slot, v) in acc.iter_mut().zip(fj.coeffs()) {
                *slot += w * v;
            }
        }
        Field::from_coeffs(grid, acc).expect("length by construction")
    }

    /// `int_0^{s_j} f` for every node `j` from per-node integrand values.
    fn prefix_integrals(&self, grid: &Arc<Grid>, f: &[Field]) -> Vec<Field> {
        let modes = grid.modes();
        let mut out = Vec::with_capacity(f.len());
        let mut prefix = vec![Complex64::default(); modes];
        for pa in 0..self.panels {
            let base = pa * self.q;
            for j in 0..self.q {
                let mut acc = prefix.clone();
                for i in 0..self.q {
                    let w = self.partial[j][i];
                    for (slot, v) in acc.iter_mut().zip(f[base + i].coeffs()) {
                        *slot += w * v;
                    }
                }
                out.push(Field::from_coeffs(grid, acc).expect("length by construction"));
            }
            for i in 0..self.q {
                let w = self.full_w[base + i];
                for (slot, v) in prefix.iter_mut().zip(f[base + i].coeffs()) {
                    *slot += w * v;
                }
            }
        }
        out
    }
}

/// High-accuracy one-step solution of the coupled Duhamel system by Picard
/// iteration; the returned state has error far below `tau^3` whenever the
/// phase-resolution precondition holds and the iteration contracts.
pub fn duhamel_reference(state: &KgsState, p: &StepParams, cfg: &OracleConfig) -> Result<KgsState> {
    cfg.validate_phase(p)?;
    let grid = state.grid().clone();
    let tables = NodeTables::build(&grid, p, cfg);
    let nn = tables.node_count();
    let sy = p.symbols(&grid);
    let inv_cn = Symbol::base(BaseKind::InvCNabla, &grid, p.c);

    // free-flow initial iterate at every node
    let mut u_nodes: Vec<Field> =
        indexed_map(nn, true, |j| state.u.apply_symbol(&tables.exp_cn_pos[j]).unwrap());
    let mut psi_nodes: Vec<Field> =
        indexed_map(nn, true, |j| state.psi.apply_symbol(&tables.exp_hl_pos[j]).unwrap());

    let mut prev_end: Option<KgsState> = None;
    // one extra sweep after the residual first meets the tolerance, so the
    // returned endpoint sits a contraction factor below it
    let mut polish = false;
    for iter in 0..cfg.picard_iters {
        // u integrand: e^{-i s c<nabla>_c} |psi(s)|^2
        let f_u: Vec<Field> = indexed_map(nn, true, |j| {
            psi_nodes[j]
                .pointwise_product(&psi_nodes[j].conj_field())
                .unwrap()
                .apply_symbol(&tables.exp_cn_neg[j])
                .unwrap()
        });
        // psi integrand: e^{-i s Delta/2} [ psi(s) (u(s) + conj u(s)) ]
        let f_psi: Vec<Field> = indexed_map(nn, true, |j| {
            let re_u = &u_nodes[j] + &u_nodes[j].conj_field();
            psi_nodes[j]
                .pointwise_product(&re_u)
                .unwrap()
                .apply_symbol(&tables.exp_hl_neg[j])
                .unwrap()
        });

        let g_u = tables.prefix_integrals(&grid, &f_u);
        let g_psi = tables.prefix_integrals(&grid, &f_psi);

        u_nodes = indexed_map(nn, true, |j| {
            let free = state.u.apply_symbol(&tables.exp_cn_pos[j]).unwrap();
            let kick = g_u[j]
                .apply_symbol(&tables.exp_cn_pos[j])
                .unwrap()
                .apply_symbol(&inv_cn)
                .unwrap()
                .scaled(-I);
            &free + &kick
        });
        psi_nodes = indexed_map(nn, true, |j| {
            let free = state.psi.apply_symbol(&tables.exp_hl_pos[j]).unwrap();
            let kick = g_psi[j]
                .apply_symbol(&tables.exp_hl_pos[j])
                .unwrap()
                .scaled(I * Complex64::new(0.5, 0.0));
            &free + &kick
        });

        // endpoint state from the full integrals of the fresh integrands
        let fu_new: Vec<Field> = indexed_map(nn, true, |j| {
            psi_nodes[j]
                .pointwise_product(&psi_nodes[j].conj_field())
                .unwrap()
                .apply_symbol(&tables.exp_cn_neg[j])
                .unwrap()
        });
        let fp_new: Vec<Field> = indexed_map(nn, true, |j| {
            let re_u = &u_nodes[j] + &u_nodes[j].conj_field();
            psi_nodes[j]
                .pointwise_product(&re_u)
                .unwrap()
                .apply_symbol(&tables.exp_hl_neg[j])
                .unwrap()
        });
        let u_end = &state.u.apply_symbol(&sy.exp_cnabla)?
            + &tables
                .full_integral(&grid, &fu_new)
                .apply_symbol(&sy.exp_cnabla)?
                .apply_symbol(&inv_cn)?
                .scaled(-I);
        let psi_end = &state.psi.apply_symbol(&sy.exp_half_lap)?
            + &tables
                .full_integral(&grid, &fp_new)
                .apply_symbol(&sy.exp_half_lap)?
                .scaled(I * Complex64::new(0.5, 0.0));
        let end = KgsState::new(u_end, psi_end)?;
        if !end.is_finite() {
            return Err(Error::BlowUp { step: iter + 1 });
        }

        if polish {
            return Ok(end);
        }
        if let Some(prev) = &prev_end {
            let residual = prev.distance(&end, 1.0);
            if residual < cfg.tol {
                polish = true;
            } else if iter + 1 == cfg.picard_iters {
                return Err(Error::PicardNonConvergence {
                    iters: cfg.picard_iters,
                    residual,
                    tol: cfg.tol,
                });
            }
        }
        prev_end = Some(end);
    }
    Err(Error::PicardNonConvergence { iters: cfg.picard_iters, residual: f64::NAN, tol: cfg.tol })
}

/// The oscillatory integrals certified by direct quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadTerm {
    /// Full u-equation integral (sum of the three sub-integrals).
    IFullU,
    /// Full psi-equation integral (sum of the seven sub-integrals).
    JFullPsi,
    I1,
    I2,
    I3,
    J1,
    J21,
    J22,
    J23,
    J24,
    J31,
    J32,
}

impl QuadTerm {
    pub const ALL: [QuadTerm; 12] = [
        QuadTerm::IFullU,
        QuadTerm::JFullPsi,
        QuadTerm::I1,
        QuadTerm::I2,
        QuadTerm::I3,
        QuadTerm::J1,
        QuadTerm::J21,
        QuadTerm::J22,
        QuadTerm::J23,
        QuadTerm::J24,
        QuadTerm::J31,
        QuadTerm::J32,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            QuadTerm::IFullU => "I_full_u",
            QuadTerm::JFullPsi => "J_full_psi",
            QuadTerm::I1 => "I1",
            QuadTerm::I2 => "I2",
            QuadTerm::I3 => "I3",
            QuadTerm::J1 => "J1",
            QuadTerm::J21 => "J21",
            QuadTerm::J22 => "J22",
            QuadTerm::J23 => "J23",
            QuadTerm::J24 => "J24",
            QuadTerm::J31 => "J31",
            QuadTerm::J32 => "J32",
        }
    }
}

struct QuadContext {
    grid: Arc<Grid>,
    tables: NodeTables,
    inv_cn: Symbol,
    u: Field,
    psi: Field,
}

impl QuadContext {
    fn new(u: &Field, psi: &Field, p: &StepParams, cfg: &OracleConfig) -> Result<QuadContext> {
        if u.grid().key() != psi.grid().key() {
            return Err(Error::GridMismatch);
        }
        cfg.validate_phase(p)?;
        let grid = u.grid().clone();
        let tables = NodeTables::build(&grid, p, cfg);
        let inv_cn = Symbol::base(BaseKind::InvCNabla, &grid, p.c);
        Ok(QuadContext { grid, tables, inv_cn, u: u.clone(), psi: psi.clone() })
    }

    fn nodes(&self) -> usize {
        self.tables.node_count()
    }

    /// `e^{+- i s c<nabla>_c} w` / `e^{+- i s Delta/2} v` at one node.
    fn u_prop(&self, j: usize, positive: bool) -> Field {
        let t = if positive { &self.tables.exp_cn_pos[j] } else { &self.tables.exp_cn_neg[j] };
        self.u.apply_symbol(t).unwrap()
    }

    fn ub_prop(&self, j: usize, positive: bool) -> Field {
        let t = if positive { &self.tables.exp_cn_pos[j] } else { &self.tables.exp_cn_neg[j] };
        self.u.conj_field().apply_symbol(t).unwrap()
    }

    fn psi_half(&self, j: usize, positive: bool) -> Field {
        let t = if positive { &self.tables.exp_hl_pos[j] } else { &self.tables.exp_hl_neg[j] };
        self.psi.apply_symbol(t).unwrap()
    }

    fn psib_half(&self, j: usize, positive: bool) -> Field {
        let t = if positive { &self.tables.exp_hl_pos[j] } else { &self.tables.exp_hl_neg[j] };
        self.psi.conj_field().apply_symbol(t).unwrap()
    }

    /// Frozen inner psi-correction with the chosen u-part:
    /// `Itilde_psi(s) = (i/2) e^{i s Delta/2} int_0^s e^{-i sg Delta/2}
    ///  (e^{i sg Delta/2} psi)(parts of e^{+-i sg c<nabla>_c} u) d sg`,
    /// evaluated at every node.
    fn inner_psi(&self, with_u: bool, with_ub: bool) -> Vec<Field> {
        let integrand: Vec<Field> = indexed_map(self.nodes(), true, |j| {
            let mut factor = Field::zeros(&self.grid);
            if with_u {
                factor = &factor + &self.u_prop(j, true);
            }
            if with_ub {
                factor = &factor + &self.ub_prop(j, false);
            }
            self.psi_half(j, true)
                .pointwise_product(&factor)
                .unwrap()
                .apply_symbol(&self.tables.exp_hl_neg[j])
                .unwrap()
        });
        let prefixes = self.tables.prefix_integrals(&self.grid, &integrand);
        indexed_map(self.nodes(), true, |j| {
            prefixes[j]
                .apply_symbol(&self.tables.exp_hl_pos[j])
                .unwrap()
                .scaled(I * Complex64::new(0.5, 0.0))
        })
    }

    /// Frozen inner u-correction:
    /// `-+ i c<nabla>_c^{-1} e^{+- i s c<nabla>_c} int_0^s e^{-+ i sg c<nabla>_c}
    ///  |e^{i sg Delta/2} psi|^2 d sg` at every node (`positive` selects the sign
    /// of the outer propagator; the leading sign is `-i` for positive).
    fn inner_u(&self, positive: bool) -> Vec<Field> {
        let integrand: Vec<Field> = indexed_map(self.nodes(), true, |j| {
            let ps = self.psi_half(j, true);
            let dens = ps.pointwise_product(&ps.conj_field()).unwrap();
            let t = if positive { &self.tables.exp_cn_neg[j] } else { &self.tables.exp_cn_pos[j] };
            dens.apply_symbol(t).unwrap()
        });
        let prefixes = self.tables.prefix_integrals(&self.grid, &integrand);
        let sign = if positive { -I } else { I };
        indexed_map(self.nodes(), true, |j| {
            let t = if positive { &self.tables.exp_cn_pos[j] } else { &self.tables.exp_cn_neg[j] };
            prefixes[j].apply_symbol(t).unwrap().apply_symbol(&self.inv_cn).unwrap().scaled(sign)
        })
    }

    fn outer(&self, f: impl Fn(usize) -> Field + Sync + Send) -> Field {
        let values: Vec<Field> = indexed_map(self.nodes(), true, f);
        self.tables.full_integral(&self.grid, &values)
    }
}

/// Direct quadrature of the named oscillatory integral with all propagators
/// applied as exact multipliers at each node and inner integrals frozen at
/// the iterated-Duhamel arguments.
pub fn quad_integral(
    term: QuadTerm,
    u: &Field,
    psi: &Field,
    p: &StepParams,
    cfg: &OracleConfig,
) -> Result<Field> {
    let ctx = QuadContext::new(u, psi, p, cfg)?;
    let q = |t: QuadTerm| -> Field {
        match t {
            QuadTerm::I1 => ctx.outer(|j| {
                let ps = ctx.psi_half(j, true);
                ps.pointwise_product(&ps.conj_field())
                    .unwrap()
                    .apply_symbol(&ctx.tables.exp_cn_neg[j])
                    .unwrap()
            }),
            QuadTerm::I2 => {
                let inner = ctx.inner_psi(true, true);
                ctx.outer(|j| {
                    ctx.psib_half(j, false)
                        .pointwise_product(&inner[j])
                        .unwrap()
                        .apply_symbol(&ctx.tables.exp_cn_neg[j])
                        .unwrap()
                })
            }
            QuadTerm::I3 => {
                let inner = ctx.inner_psi(true, true);
                ctx.outer(|j| {
                    ctx.psi_half(j, true)
                        .pointwise_product(&inner[j].conj_field())
                        .unwrap()
                        .apply_symbol(&ctx.tables.exp_cn_neg[j])
                        .unwrap()
                })
            }
            QuadTerm::J1 => ctx.outer(|j| {
                let factor = &ctx.u_prop(j, true) + &ctx.ub_prop(j, false);
                ctx.psi_half(j, true)
                    .pointwise_product(&factor)
                    .unwrap()
                    .apply_symbol(&ctx.tables.exp_hl_neg[j])
                    .unwrap()
            }),
            QuadTerm::J21 | QuadTerm::J22 | QuadTerm::J23 | QuadTerm::J24 => {
                let inner = match t {
                    QuadTerm::J21 | QuadTerm::J22 => ctx.inner_psi(true, false),
                    _ => ctx.inner_psi(false, true),
                };
                let outer_positive = matches!(t, QuadTerm::J21 | QuadTerm::J23);
                ctx.outer(|j| {
                    let w = if outer_positive { ctx.u_prop(j, true) } else { ctx.ub_prop(j, false) };
                    inner[j]
                        .pointwise_product(&w)
                        .unwrap()
                        .apply_symbol(&ctx.tables.exp_hl_neg[j])
                        .unwrap()
                })
            }
            QuadTerm::J31 | QuadTerm::J32 => {
                let inner = ctx.inner_u(matches!(t, QuadTerm::J31));
                ctx.outer(|j| {
                    ctx.psi_half(j, true)
                        .pointwise_product(&inner[j])
                        .unwrap()
                        .apply_symbol(&ctx.tables.exp_hl_neg[j])
                        .unwrap()
                })
            }
            QuadTerm::IFullU | QuadTerm::JFullPsi => unreachable!("handled below"),
        }
    };
    Ok(match term {
        QuadTerm::IFullU => {
            let mut acc = q(QuadTerm::I1);
            for t in [QuadTerm::I2, QuadTerm::I3] {
                acc = &acc + &q(t);
            }
            acc
        }
        QuadTerm::JFullPsi => {
            let mut acc = q(QuadTerm::J1);
            for t in
                [QuadTerm::J21, QuadTerm::J22, QuadTerm::J23, QuadTerm::J24, QuadTerm::J31, QuadTerm::J32]
            {
                acc = &acc + &q(t);
            }
            acc
        }
        t => q(t),
    })
}

/// First order closed form of the u-equation integral,
/// `tau conj(psi) phi1(i tau (Delta - c^2)) psi`.
pub fn leading_order_u(u: &Field, psi: &Field, p: &StepParams) -> Result<Field> {
    let _ = u;
    let sy = p.symbols(psi.grid());
    Ok(psi
        .conj_field()
        .pointwise_product(&psi.apply_symbol(&sy.phi1_dm)?)?
        .scaled(Complex64::new(p.tau, 0.0)))
}

/// First order closed form of the psi-equation integral,
/// `tau psi ( phi1(i tau (c<nabla>_c - Delta/2)) u + phi1(-i tau (c<nabla>_c + Delta/2)) conj u )`.
pub fn leading_order_psi(u: &Field, psi: &Field, p: &StepParams) -> Result<Field> {
    let sy = p.symbols(psi.grid());
    let bracket = &u.apply_symbol(&sy.phi1_am)? + &u.conj_field().apply_symbol(&sy.phi1_ap_neg)?;
    Ok(psi.pointwise_product(&bracket)?.scaled(Complex64::new(p.tau, 0.0)))
}

/// Classical 4th order reference on the coefficient ODE system with the
/// linear flows factored out (Lawson integrating-factor RK4). Requires
/// `c <= 32` and `c^2 T / n_fine <= 0.1`; used only to certify the Duhamel
/// oracle and small-`c` convergence studies.
pub fn resolved_reference(
    state: &KgsState,
    c: CParam,
    t_final: f64,
    n_fine: usize,
) -> Result<KgsState> {
    if c.value() > 32.0 {
        return Err(Error::InvalidParam(format!(
            "resolved reference is limited to c <= 32, got {}",
            c.value()
        )));
    }
    if n_fine == 0 || !t_final.is_finite() || t_final <= 0.0 {
        return Err(Error::InvalidParam("need t_final > 0 and n_fine > 0".into()));
    }
    let resolution = c.squared() * t_final / n_fine as f64;
    if resolution > 0.1 + 1e-12 {
        return Err(Error::StepResolution(resolution));
    }

    let grid = state.grid().clone();
    let h = t_final / n_fine as f64;
    let c2 = c.squared();
    let cn: Vec<f64> = grid.k_squared().iter().map(|&k2| c.value() * (c2 + k2).sqrt()).collect();
    let hl: Vec<f64> = grid.k_squared().iter().map(|&k2| -0.5 * k2).collect();
    let phase = |v: &Vec<f64>, t: f64| Symbol::from_fn(&grid, |i| Complex64::cis(t * v[i]));
    // stage propagators at sigma in {h/2, h}
    let eu_half = phase(&cn, 0.5 * h);
    let eu_full = phase(&cn, h);
    let eu_half_inv = phase(&cn, -0.5 * h);
    let eu_full_inv = phase(&cn, -h);
    let ep_half = phase(&hl, 0.5 * h);
    let ep_full = phase(&hl, h);
    let ep_half_inv = phase(&hl, -0.5 * h);
    let ep_full_inv = phase(&hl, -h);
    let inv_cn = Symbol::base(BaseKind::InvCNabla, &grid, c);

    // nonlinear right sides of the first order system
    let n_u = |psi: &Field| -> Field {
        psi.pointwise_product(&psi.conj_field())
            .unwrap()
            .apply_symbol(&inv_cn)
            .unwrap()
            .scaled(-I)
    };
    let n_psi = |u: &Field, psi: &Field| -> Field {
        let re_u = u + &u.conj_field();
        psi.pointwise_product(&re_u).unwrap().scaled(I * Complex64::new(0.5, 0.0))
    };
    // Lawson stage derivative at offset sigma: F(sigma, a, b) =
    // ( e^{-i sigma L_u} N_u(e^{i sigma L_psi} b),
    //   e^{-i sigma L_psi} N_psi(e^{i sigma L_u} a, e^{i sigma L_psi} b) )
    let stage = |a: &Field, b: &Field, fwd: Option<(&Symbol, &Symbol, &Symbol, &Symbol)>| {
        match fwd {
            None => {
                let fa = n_u(b);
                let fb = n_psi(a, b);
                (fa, fb)
            }
            Some((eu, ep, eu_inv, ep_inv)) => {
                let u = a.apply_symbol(eu).unwrap();
                let psi = b.apply_symbol(ep).unwrap();
                let fa = n_u(&psi).apply_symbol(eu_inv).unwrap();
                let fb = n_psi(&u, &psi).apply_symbol(ep_inv).unwrap();
                (fa, fb)
            }
        }
    };

    let mut a = state.u.clone();
    let mut b = state.psi.clone();
    let sixth = Complex64::new(h / 6.0, 0.0);
    let half_h = Complex64::new(0.5 * h, 0.0);
    let full_h = Complex64::new(h, 0.0);
    for step in 1..=n_fine {
        let (k1a, k1b) = stage(&a, &b, None);
        let (k2a, k2b) = stage(
            &(&a + &k1a.scaled(half_h)),
            &(&b + &k1b.scaled(half_h)),
            Some((&eu_half, &ep_half, &eu_half_inv, &ep_half_inv)),
        );
        let (k3a, k3b) = stage(
            &(&a + &k2a.scaled(half_h)),
            &(&b + &k2b.scaled(half_h)),
            Some((&eu_half, &ep_half, &eu_half_inv, &ep_half_inv)),
        );
        let (k4a, k4b) = stage(
            &(&a + &k3a.scaled(full_h)),
            &(&b + &k3b.scaled(full_h)),
            Some((&eu_full, &ep_full, &eu_full_inv, &ep_full_inv)),
        );
        let da = &(&k1a + &k4a) + &(&k2a + &k3a).scaled(Complex64::new(2.0, 0.0));
        let db = &(&k1b + &k4b) + &(&k2b + &k3b).scaled(Complex64::new(2.0, 0.0));
        // advance the transformed variables, then push the linear flow forward
        a = (&a + &da.scaled(sixth)).apply_symbol(&eu_full)?;
        b = (&b + &db.scaled(sixth)).apply_symbol(&ep_full)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::BlowUp { step });
        }
    }
    KgsState::new(a, b)
}
