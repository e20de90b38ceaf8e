//! Equilibrium-independent passive plant models.
//!
//! Two families are built in: a vehicle platoon (outputs are velocities) and
//! a power network under the swing equation (outputs are generator
//! frequencies, kept in Hz with a 60 Hz nominal). Both satisfy the strict EIP
//! inequality `Ṡ ≤ −ρ‖y−y*‖² + (y−y*)ᵀ(u−u*)` with explicit storage
//! functions, which is what the controller-side guarantees rest on.
//!
//! Storage is evaluated relative to the equilibrium (Bregman form of the
//! quadratic coupling term for the platoon), so `S(x*,x*) = 0`; the EIP
//! derivative inequality is unchanged by that offset.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{mean, project_zero_mean, solve_spd};
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Plant state: a coupling coordinate (relative positions / rotor angles) and
/// the measured output (velocities / frequencies).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub pos: Array1<f64>,
    pub y: Array1<f64>,
}

impl PlantState {
    pub fn zeros(m: usize) -> Self {
        PlantState {
            pos: Array1::zeros(m),
            y: Array1::zeros(m),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }

    pub fn scaled_add(&mut self, s: f64, other: &PlantState) {
        self.pos.scaled_add(s, &other.pos);
        self.y.scaled_add(s, &other.y);
    }

    pub fn norm_inf(&self) -> f64 {
        self.pos
            .iter()
            .chain(self.y.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Equilibrium data `(x*, u*)` with a feasibility flag; solvers report
/// failure through the flag instead of panicking.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub state: PlantState,
    pub u: Array1<f64>,
    pub feasible: bool,
}

/// Vehicle platoon: `ζ̇ = Γy`, `ẏ = κ̂(−(y−λ⁰) + ρ̂(u − E D̂ Eᵀ ζ))`.
#[derive(Debug, Clone)]
pub struct PlatoonModel {
    /// velocity-tracking sensitivity κ_i (1/s)
    pub kappa: Array1<f64>,
    /// control gain ρ_i (dimensionless)
    pub rho: Array1<f64>,
    /// default velocities λ⁰_i (m/s)
    pub lambda0: Array1<f64>,
    /// node-edge incidence matrix (m × e)
    pub incidence: Array2<f64>,
    /// distance sensitivity per edge D_j (diagonal of D̂)
    pub line_sensitivity: Array1<f64>,
    /// transient-cost control weights c_i
    pub cost_weights: Array1<f64>,
}

/// Power network under the swing equation:
/// `δ̇ = Γy`, `M̂ẏ = −D̂(y−ȳ) − d + u − E b̂ sin(Eᵀδ)`.
#[derive(Debug, Clone)]
pub struct PowerModel {
    /// inertia M_i (s²)
    pub inertia: Array1<f64>,
    /// damping D_i (s)
    pub damping: Array1<f64>,
    /// net load d_i (p.u.)
    pub load: Array1<f64>,
    /// node-edge incidence matrix (m × e)
    pub incidence: Array2<f64>,
    /// line susceptance b_j (p.u.)
    pub susceptance: Array1<f64>,
    /// nominal frequency ȳ (Hz)
    pub nominal_frequency: f64,
}

#[derive(Debug, Clone)]
pub enum Plant {
    Platoon(PlatoonModel),
    Power(PowerModel),
}

/// Incidence matrix from an edge list: +1 on the tail row, −1 on the head row.
pub fn incidence_from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
    let mut e = Array2::<f64>::zeros((m, edges.len()));
    for (j, &(tail, head)) in edges.iter().enumerate() {
        if tail >= m || head >= m || tail == head {
            return Err(Error::Config(format!("bad edge ({tail}, {head})")));
        }
        e[[tail, j]] = 1.0;
        e[[head, j]] = -1.0;
    }
    // ker(Eᵀ) = span(1) needs a connected graph
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    let mut parent: Vec<usize> = (0..m).collect();
    for &(t, h) in edges {
        let (rt, rh) = (find(&mut parent, t), find(&mut parent, h));
        parent[rt] = rh;
    }
    let root = find(&mut parent, 0);
    for i in 1..m {
        if find(&mut parent, i) != root {
            return Err(Error::Config("plant graph must be connected".into()));
        }
    }
    Ok(e)
}

pub fn chain_edges(m: usize) -> Vec<(usize, usize)> {
    (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

pub fn ring_edges(m: usize) -> Vec<(usize, usize)> {
    if m == 2 {
        return vec![(0, 1)];
    }
    (0..m).map(|i| (i, (i + 1) % m)).collect()
}

impl PlatoonModel {
    /// Chain platoon with κ_i = 1, λ⁰_i ~ U[5,6] m/s, ρ_i ~ U[1,2], unit
    /// line sensitivity, and cost weights c_i ~ U[0.025, 0.075].
    pub fn generate<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        assert!(m >= 2);
        let lambda0 = Array1::from_shape_fn(m, |_| rng.random_range(5.0..6.0));
        let rho = Array1::from_shape_fn(m, |_| rng.random_range(1.0..2.0));
        let cost_weights = Array1::from_shape_fn(m, |_| rng.random_range(0.025..0.075));
        let edges = chain_edges(m);
        PlatoonModel {
            kappa: Array1::ones(m),
            rho,
            lambda0,
            incidence: incidence_from_edges(m, &edges).expect("chain is connected"),
            line_sensitivity: Array1::ones(edges.len()),
            cost_weights,
        }
    }

    pub fn size(&self) -> usize {
        self.kappa.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.size();
        check_dim("platoon rho", m, self.rho.len())?;
        check_dim("platoon lambda0", m, self.lambda0.len())?;
        check_dim("platoon incidence rows", m, self.incidence.nrows())?;
        check_dim(
            "platoon line sensitivity",
            self.incidence.ncols(),
            self.line_sensitivity.len(),
        )?;
        check_dim("platoon cost weights", m, self.cost_weights.len())?;
        if self.kappa.iter().any(|&v| v <= 0.0)
            || self.rho.iter().any(|&v| v <= 0.0)
            || self.line_sensitivity.iter().any(|&v| v <= 0.0)
        {
            return Err(Error::Domain(
                "platoon κ, ρ and line sensitivities must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// E D̂ Eᵀ v
    fn coupling_apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let flows = &self.incidence.t().dot(v) * &self.line_sensitivity;
        self.incidence.dot(&flows)
    }
}

impl PowerModel {
    /// Synthetic network with M_i ~ U[0.1,0.4] s², D_i ~ U[0.5,1.5] s,
    /// b_j ~ U[5,15] p.u., and a balanced base load d ~ U[−0.3,0.3] p.u.
    pub fn generate<R: Rng + ?Sized>(m: usize, edges: &[(usize, usize)], rng: &mut R) -> Self {
        let inertia = Array1::from_shape_fn(m, |_| rng.random_range(0.1..0.4));
        let damping = Array1::from_shape_fn(m, |_| rng.random_range(0.5..1.5));
        let susceptance = Array1::from_shape_fn(edges.len(), |_| rng.random_range(5.0..15.0));
        let raw_load = Array1::from_shape_fn(m, |_| rng.random_range(-0.3..0.3));
        PowerModel {
            inertia,
            damping,
            load: project_zero_mean(&raw_load),
            incidence: incidence_from_edges(m, edges).expect("valid topology"),
            susceptance,
            nominal_frequency: 60.0,
        }
    }

    pub fn size(&self) -> usize {
        self.inertia.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.size();
        check_dim("power damping", m, self.damping.len())?;
        check_dim("power load", m, self.load.len())?;
        check_dim("power incidence rows", m, self.incidence.nrows())?;
        check_dim(
            "power susceptance",
            self.incidence.ncols(),
            self.susceptance.len(),
        )?;
        if self.inertia.iter().any(|&v| v <= 0.0)
            || self.damping.iter().any(|&v| v <= 0.0)
            || self.susceptance.iter().any(|&v| v <= 0.0)
        {
            return Err(Error::Domain(
                "power M, D and b must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// E b̂ sin(Eᵀδ)
    pub fn line_torque(&self, delta: &Array1<f64>) -> Array1<f64> {
        let theta = self.incidence.t().dot(delta);
        let flows = theta.mapv(f64::sin) * &self.susceptance;
        self.incidence.dot(&flows)
    }
}

impl Plant {
    pub fn dim(&self) -> usize {
        match self {
            Plant::Platoon(p) => p.size(),
            Plant::Power(p) => p.size(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Plant::Platoon(_) => "platoon",
            Plant::Power(_) => "power",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Plant::Platoon(p) => p.validate(),
            Plant::Power(p) => p.validate(),
        }
    }

    /// Time derivative of the state under control `u`.
    pub fn derivative(&self, state: &PlantState, u: &Array1<f64>) -> Result<PlantState> {
        let m = self.dim();
        check_dim("plant state pos", m, state.pos.len())?;
        check_dim("plant state y", m, state.y.len())?;
        check_dim("plant input", m, u.len())?;
        match self {
            Plant::Platoon(p) => {
                let pos_dot = project_zero_mean(&state.y);
                let force = u - &p.coupling_apply(&state.pos);
                let y_dot = &p.kappa * &(-(&state.y - &p.lambda0) + &(&p.rho * &force));
                Ok(PlantState {
                    pos: pos_dot,
                    y: y_dot,
                })
            }
            Plant::Power(p) => {
                let pos_dot = project_zero_mean(&state.y);
                let torque = p.line_torque(&state.pos);
                let imbalance = -(&p.damping * &state.y.mapv(|v| v - p.nominal_frequency))
                    - &p.load
                    + u
                    - &torque;
                Ok(PlantState {
                    pos: pos_dot,
                    y: imbalance / &p.inertia,
                })
            }
        }
    }

    /// True when any line angle difference leaves (−π/2, π/2). Platoons have
    /// no operating-region constraint.
    pub fn region_violation(&self, state: &PlantState) -> bool {
        match self {
            Plant::Platoon(_) => false,
            Plant::Power(p) => {
                let theta = p.incidence.t().dot(&state.pos);
                theta.iter().any(|v| v.abs() >= std::f64::consts::FRAC_PI_2)
            }
        }
    }

    /// Reverse-mode contraction of the derivative's Jacobians:
    /// returns `((∂f/∂x)ᵀ seed, (∂f/∂u)ᵀ seed)`.
    pub fn derivative_vjp(
        &self,
        state: &PlantState,
        seed: &PlantState,
    ) -> Result<(PlantState, Array1<f64>)> {
        let m = self.dim();
        check_dim("plant vjp seed pos", m, seed.pos.len())?;
        check_dim("plant vjp seed y", m, seed.y.len())?;
        match self {
            Plant::Platoon(p) => {
                let kr_ay = &p.kappa * &p.rho * &seed.y;
                let d_pos = -p.coupling_apply(&kr_ay);
                let d_y = project_zero_mean(&seed.pos) - &(&p.kappa * &seed.y);
                let d_u = kr_ay;
                Ok((PlantState { pos: d_pos, y: d_y }, d_u))
            }
            Plant::Power(p) => {
                let ay_m = &seed.y / &p.inertia;
                let theta = p.incidence.t().dot(&state.pos);
                let w = theta.mapv(f64::cos) * &p.susceptance * &p.incidence.t().dot(&ay_m);
                let d_pos = -p.incidence.dot(&w);
                let d_y = project_zero_mean(&seed.pos) - &(&p.damping * &ay_m);
                Ok((PlantState { pos: d_pos, y: d_y }, ay_m))
            }
        }
    }

    /// Storage function S(x, x*), zero at the equilibrium.
    pub fn storage(&self, state: &PlantState, eq: &Equilibrium) -> Result<f64> {
        if !eq.feasible {
            return Err(Error::Domain(
                "storage requires a feasible equilibrium".into(),
            ));
        }
        let dy = &state.y - &eq.state.y;
        match self {
            Plant::Platoon(p) => {
                let kinetic = 0.5
                    * dy.iter()
                        .zip(p.kappa.iter())
                        .zip(p.rho.iter())
                        .map(|((&d, &k), &r)| d * d / (k * r))
                        .sum::<f64>();
                let dpos = &state.pos - &eq.state.pos;
                let coupling = 0.5 * dpos.dot(&p.coupling_apply(&dpos));
                Ok(kinetic + coupling)
            }
            Plant::Power(p) => {
                let kinetic = 0.5
                    * dy.iter()
                        .zip(p.inertia.iter())
                        .map(|(&d, &m)| d * d * m)
                        .sum::<f64>();
                let theta = p.incidence.t().dot(&state.pos);
                let theta_eq = p.incidence.t().dot(&eq.state.pos);
                let mut potential = 0.0;
                for j in 0..theta.len() {
                    potential -= p.susceptance[j] * (theta[j].cos() - theta_eq[j].cos());
                    potential -= p.susceptance[j] * theta_eq[j].sin() * (theta[j] - theta_eq[j]);
                }
                Ok(kinetic + potential)
            }
        }
    }

    /// ∇S with respect to the state.
    pub fn storage_grad(&self, state: &PlantState, eq: &Equilibrium) -> Result<PlantState> {
        if !eq.feasible {
            return Err(Error::Domain(
                "storage requires a feasible equilibrium".into(),
            ));
        }
        let dy = &state.y - &eq.state.y;
        match self {
            Plant::Platoon(p) => {
                let g_y = dy
                    .iter()
                    .zip(p.kappa.iter())
                    .zip(p.rho.iter())
                    .map(|((&d, &k), &r)| d / (k * r))
                    .collect::<Array1<f64>>();
                let dpos = &state.pos - &eq.state.pos;
                Ok(PlantState {
                    pos: p.coupling_apply(&dpos),
                    y: g_y,
                })
            }
            Plant::Power(p) => {
                let g_y = &dy * &p.inertia;
                let g_pos = p.line_torque(&state.pos) - p.line_torque(&eq.state.pos);
                Ok(PlantState { pos: g_pos, y: g_y })
            }
        }
    }

    /// Passivity rate ρ of the EIP inequality.
    pub fn eip_rho(&self) -> f64 {
        match self {
            Plant::Platoon(p) => p.rho.iter().map(|&r| 1.0 / r).fold(f64::INFINITY, f64::min),
            Plant::Power(p) => p.damping.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `Ṡ + ρ‖y−y*‖² − (y−y*)ᵀ(u−u*)`, with Ṡ evaluated analytically as
    /// ∇S·f(x,u). Nonpositive (up to rounding) for every state and input.
    pub fn eip_residual(
        &self,
        state: &PlantState,
        u: &Array1<f64>,
        eq: &Equilibrium,
    ) -> Result<f64> {
        let grad = self.storage_grad(state, eq)?;
        let deriv = self.derivative(state, u)?;
        let s_dot = grad.pos.dot(&deriv.pos) + grad.y.dot(&deriv.y);
        let dy = &state.y - &eq.state.y;
        let du = u - &eq.u;
        Ok(s_dot + self.eip_rho() * dy.dot(&dy) - dy.dot(&du))
    }

    /// Equilibrium for a given input `u*`.
    ///
    /// Platoon: closed-form (the consensus velocity follows from `u*` and the
    /// force balance fixes the zero-mean position profile; `ybar` does not
    /// enter). Power: `y* = ȳ` and damped Newton on the power-flow balance
    /// for the angles; infeasibility is reported, never panicked.
    pub fn solve_equilibrium(
        &self,
        u_star: &Array1<f64>,
        ybar: &Array1<f64>,
    ) -> Result<Equilibrium> {
        self.solve_equilibrium_from(u_star, ybar, None)
    }

    /// Same as [`Plant::solve_equilibrium`] with an explicit Newton start.
    pub fn solve_equilibrium_from(
        &self,
        u_star: &Array1<f64>,
        ybar: &Array1<f64>,
        start: Option<&Array1<f64>>,
    ) -> Result<Equilibrium> {
        let m = self.dim();
        check_dim("equilibrium input", m, u_star.len())?;
        check_dim("equilibrium setpoint", m, ybar.len())?;
        match self {
            Plant::Platoon(p) => {
                let inv_rho_sum: f64 = p.rho.iter().map(|&r| 1.0 / r).sum();
                let c = (u_star.sum()
                    + p.lambda0
                        .iter()
                        .zip(p.rho.iter())
                        .map(|(&l, &r)| l / r)
                        .sum::<f64>())
                    / inv_rho_sum;
                let y_star = Array1::from_elem(m, c);
                // E D̂ Eᵀ ζ* = u* − ρ̂⁻¹(y* − λ⁰), solved on the zero-mean subspace
                let w = u_star
                    - &p.rho
                        .iter()
                        .zip(p.lambda0.iter())
                        .map(|(&r, &l)| (c - l) / r)
                        .collect::<Array1<f64>>();
                let mut lap = Array2::<f64>::zeros((m, m));
                for i in 0..m {
                    let mut ei = Array1::<f64>::zeros(m);
                    ei[i] = 1.0;
                    let col = p.coupling_apply(&ei);
                    for r in 0..m {
                        lap[[r, i]] = col[r];
                    }
                }
                let mf = m as f64;
                for i in 0..m {
                    for j in 0..m {
                        lap[[i, j]] += 1.0 / mf;
                    }
                }
                match solve_spd(&lap, &w) {
                    Some(zeta) => Ok(Equilibrium {
                        state: PlantState {
                            pos: project_zero_mean(&zeta),
                            y: y_star,
                        },
                        u: u_star.clone(),
                        feasible: true,
                    }),
                    None => Ok(Equilibrium {
                        state: PlantState::zeros(m),
                        u: u_star.clone(),
                        feasible: false,
                    }),
                }
            }
            Plant::Power(p) => {
                let ybar_mean = mean(ybar);
                if ybar.iter().any(|&v| (v - ybar_mean).abs() > 1e-9) {
                    return Err(Error::Config(
                        "power setpoint must be a common frequency".into(),
                    ));
                }
                let y_star = Array1::from_elem(m, ybar_mean);
                let w = u_star
                    - &p.load
                    - &(&p.damping * &y_star.mapv(|v| v - p.nominal_frequency));
                let infeasible = |u: &Array1<f64>| Equilibrium {
                    state: PlantState {
                        pos: Array1::zeros(m),
                        y: y_star.clone(),
                    },
                    u: u.clone(),
                    feasible: false,
                };
                // total power must balance for y* = ȳ to be attainable
                if w.sum().abs() > 1e-8 * (1.0 + w.mapv(f64::abs).sum()) {
                    return Ok(infeasible(u_star));
                }
                let mut delta = match start {
                    Some(d0) => project_zero_mean(d0),
                    None => Array1::zeros(m),
                };
                let mf = m as f64;
                let mut converged = false;
                for _ in 0..100 {
                    let res = p.line_torque(&delta) - &w;
                    if res.iter().all(|v| v.abs() < 1e-10) {
                        converged = true;
                        break;
                    }
                    let rnorm = res.mapv(f64::abs).sum();
                    let theta = p.incidence.t().dot(&delta);
                    let wdiag = theta.mapv(f64::cos) * &p.susceptance;
                    let mut jac = Array2::<f64>::zeros((m, m));
                    for j in 0..theta.len() {
                        // edge term b_j cosθ_j (e_t − e_h)(e_t − e_h)ᵀ
                        let col = p.incidence.column(j);
                        for a in 0..m {
                            if col[a] == 0.0 {
                                continue;
                            }
                            for b in 0..m {
                                if col[b] == 0.0 {
                                    continue;
                                }
                                jac[[a, b]] += wdiag[j] * col[a] * col[b];
                            }
                        }
                    }
                    for a in 0..m {
                        for b in 0..m {
                            jac[[a, b]] += 1.0 / mf;
                        }
                    }
                    let step = match solve_spd(&jac, &res.mapv(|v| -v)) {
                        Some(s) => s,
                        None => return Ok(infeasible(u_star)),
                    };
                    let mut alpha = 1.0;
                    let mut accepted = false;
                    for _ in 0..40 {
                        let cand = &delta + &(&step * alpha);
                        let cand_norm = (p.line_torque(&cand) - &w).mapv(f64::abs).sum();
                        if cand_norm < rnorm {
                            delta = cand;
                            accepted = true;
                            break;
                        }
                        alpha *= 0.5;
                    }
                    if !accepted {
                        return Ok(infeasible(u_star));
                    }
                }
                let theta = p.incidence.t().dot(&delta);
                let in_region = theta.iter().all(|v| v.abs() < std::f64::consts::FRAC_PI_2);
                Ok(Equilibrium {
                    state: PlantState {
                        pos: project_zero_mean(&delta),
                        y: y_star,
                    },
                    u: u_star.clone(),
                    feasible: converged && in_region,
                })
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = PlantFile::from_plant(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Plant> {
        let text = std::fs::read_to_string(path)?;
        let file: PlantFile = serde_json::from_str(&text)?;
        file.into_plant()
    }
}

/// On-disk schema for plant parameters; the incidence matrix is stored as an
/// edge list `(tail, head)` and units are documented per field, so externally
/// supplied networks load through the same format.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlantFile {
    pub kind: String,
    pub size: usize,
    pub edges: Vec<(usize, usize)>,
    pub units: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_sensitivity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub susceptance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_frequency: Option<f64>,
}

fn edges_of(incidence: &Array2<f64>) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(incidence.ncols());
    for j in 0..incidence.ncols() {
        let mut tail = 0;
        let mut head = 0;
        for i in 0..incidence.nrows() {
            if incidence[[i, j]] > 0.5 {
                tail = i;
            } else if incidence[[i, j]] < -0.5 {
                head = i;
            }
        }
        edges.push((tail, head));
    }
    edges
}

impl PlantFile {
    pub fn from_plant(plant: &Plant) -> Self {
        let mut units = BTreeMap::new();
        match plant {
            Plant::Platoon(p) => {
                units.insert("kappa".into(), "1/s".into());
                units.insert("rho".into(), "dimensionless".into());
                units.insert("lambda0".into(), "m/s".into());
                units.insert("line_sensitivity".into(), "1/s^2".into());
                units.insert("cost_weights".into(), "s^2/m^2".into());
                PlantFile {
                    kind: "platoon".into(),
                    size: p.size(),
                    edges: edges_of(&p.incidence),
                    units,
                    kappa: Some(p.kappa.to_vec()),
                    rho: Some(p.rho.to_vec()),
                    lambda0: Some(p.lambda0.to_vec()),
                    line_sensitivity: Some(p.line_sensitivity.to_vec()),
                    cost_weights: Some(p.cost_weights.to_vec()),
                    inertia: None,
                    damping: None,
                    load: None,
                    susceptance: None,
                    nominal_frequency: None,
                }
            }
            Plant::Power(p) => {
                units.insert("inertia".into(), "s^2".into());
                units.insert("damping".into(), "s".into());
                units.insert("load".into(), "p.u.".into());
                units.insert("susceptance".into(), "p.u.".into());
                units.insert("nominal_frequency".into(), "Hz".into());
                PlantFile {
                    kind: "power".into(),
                    size: p.size(),
                    edges: edges_of(&p.incidence),
                    units,
                    kappa: None,
                    rho: None,
                    lambda0: None,
                    line_sensitivity: None,
                    cost_weights: None,
                    inertia: Some(p.inertia.to_vec()),
                    damping: Some(p.damping.to_vec()),
                    load: Some(p.load.to_vec()),
                    susceptance: Some(p.susceptance.to_vec()),
                    nominal_frequency: Some(p.nominal_frequency),
                }
            }
        }
    }

    pub fn into_plant(self) -> Result<Plant> {
        let m = self.size;
        let incidence = incidence_from_edges(m, &self.edges)?;
        let need = |o: Option<Vec<f64>>, name: &str| {
            o.map(Array1::from_vec)
                .ok_or_else(|| Error::Config(format!("missing field `{name}`")))
        };
        let plant = match self.kind.as_str() {
            "platoon" => Plant::Platoon(PlatoonModel {
                kappa: need(self.kappa, "kappa")?,
                rho: need(self.rho, "rho")?,
                lambda0: need(self.lambda0, "lambda0")?,
                incidence,
                line_sensitivity: need(self.line_sensitivity, "line_sensitivity")?,
                cost_weights: need(self.cost_weights, "cost_weights")?,
            }),
            "power" => Plant::Power(PowerModel {
                inertia: need(self.inertia, "inertia")?,
                damping: need(self.damping, "damping")?,
                load: need(self.load, "load")?,
                incidence,
                susceptance: need(self.susceptance, "susceptance")?,
                nominal_frequency: self.nominal_frequency.unwrap_or(60.0),
            }),
            other => return Err(Error::Config(format!("unknown plant kind `{other}`"))),
        };
        plant.validate()?;
        Ok(plant)
    }
}
