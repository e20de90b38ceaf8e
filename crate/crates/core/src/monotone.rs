//! Strictly monotone vector operators and the generalized PI control law.
//!
//! An operator is a sum of per-group maps, each acting on a subset of signal
//! indices (the communication partition): coordinates a group does not
//! contain can never influence its output, so communication limits hold by
//! construction. When every group is the input-gradient of a strictly convex
//! function, the summed operator is the gradient of a sum of strictly convex
//! functions and therefore strictly monotone.

use crate::error::{check_dim, Error, Result};
use crate::scnn::{DenseGrad, DenseNet, QuadraticConvex, QuadraticGrad, ScnnGrad, ScnnParams};
use ndarray::{Array1, Array2};
use rand::Rng;

/// Signal-index groups allowed to share measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommPartition {
    dim: usize,
    groups: Vec<Vec<usize>>,
}

impl CommPartition {
    /// Validates that every group is sorted, duplicate-free, and in range.
    /// Indices covered by no group are legal (they receive zero control
    /// contribution) but are reported by [`CommPartition::uncovered_indices`].
    pub fn new(dim: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Config("empty communication group".into()));
            }
            for w in g.windows(2) {
                if w[1] <= w[0] {
                    return Err(Error::Config(
                        "group indices must be sorted and duplicate-free".into(),
                    ));
                }
            }
            if *g.last().unwrap() >= dim {
                return Err(Error::Config(format!(
                    "group index {} out of range for dimension {}",
                    g.last().unwrap(),
                    dim
                )));
            }
        }
        Ok(CommPartition { dim, groups })
    }

    /// One group holding every index (global communication).
    pub fn full(dim: usize) -> Self {
        CommPartition {
            dim,
            groups: vec![(0..dim).collect()],
        }
    }

    /// One singleton group per index (no communication).
    pub fn decentralized(dim: usize) -> Self {
        CommPartition {
            dim,
            groups: (0..dim).map(|i| vec![i]).collect(),
        }
    }

    /// First half of the indices share one group, the rest are singletons.
    pub fn half(dim: usize) -> Self {
        let cut = dim.div_ceil(2);
        let mut groups = vec![(0..cut).collect::<Vec<_>>()];
        groups.extend((cut..dim).map(|i| vec![i]));
        CommPartition { dim, groups }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Indices that appear in no group; such outputs stay identically zero.
    pub fn uncovered_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.dim];
        for g in &self.groups {
            for &i in g {
                seen[i] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| if s { None } else { Some(i) })
            .collect()
    }

    /// True when two coordinates share at least one group.
    pub fn coupled(&self, i: usize, j: usize) -> bool {
        self.groups
            .iter()
            .any(|g| g.binary_search(&i).is_ok() && g.binary_search(&j).is_ok())
    }
}

/// One per-group map.
///
/// `Scnn` and `Quadratic` are gradients of strictly convex functions and keep
/// the monotonicity guarantee; `LinearMap` (raw trainable matrix) and `Dense`
/// (raw network output) are baseline configurations without it.
#[derive(Debug, Clone)]
pub enum GroupHandle {
    Scnn(ScnnParams),
    Quadratic(QuadraticConvex),
    LinearMap(Array2<f64>),
    Dense(DenseNet),
}

impl GroupHandle {
    pub fn dim(&self) -> usize {
        match self {
            GroupHandle::Scnn(p) => p.input_dim(),
            GroupHandle::Quadratic(q) => q.dim(),
            GroupHandle::LinearMap(k) => k.nrows(),
            GroupHandle::Dense(d) => d.input_dim(),
        }
    }

    fn eval(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            GroupHandle::Scnn(p) => Ok(p.value_and_grad(z)?.1),
            GroupHandle::Quadratic(q) => q.eval(z),
            GroupHandle::LinearMap(k) => {
                check_dim("linear map input", k.ncols(), z.len())?;
                Ok(k.dot(z))
            }
            GroupHandle::Dense(d) => Ok(d.forward(z)?.0),
        }
    }

    /// Value of the underlying convex function, where one exists.
    fn convex_value(&self, z: &Array1<f64>) -> Result<f64> {
        match self {
            GroupHandle::Scnn(p) => Ok(p.forward(z)?.0),
            GroupHandle::Quadratic(q) => q.value(z),
            GroupHandle::LinearMap(_) | GroupHandle::Dense(_) => Err(Error::Domain(
                "handle is not the gradient of a convex function".into(),
            )),
        }
    }

    fn vjp(&self, z: &Array1<f64>, seed: &Array1<f64>) -> Result<(Array1<f64>, GroupGrad)> {
        match self {
            GroupHandle::Scnn(p) => {
                let (_, rec) = p.forward(z)?;
                let (dz, g) = p.vjp(&rec, 0.0, Some(seed))?;
                Ok((dz, GroupGrad::Scnn(g)))
            }
            GroupHandle::Quadratic(q) => {
                let (dz, g) = q.vjp(z, 0.0, Some(seed))?;
                Ok((dz, GroupGrad::Quadratic(g)))
            }
            GroupHandle::LinearMap(k) => {
                check_dim("linear map input", k.ncols(), z.len())?;
                let dz = k.t().dot(seed);
                let mut dk = Array2::<f64>::zeros(k.raw_dim());
                crate::linalg::add_scaled_outer(&mut dk, 1.0, seed.view(), z.view());
                Ok((dz, GroupGrad::LinearMap(dk)))
            }
            GroupHandle::Dense(d) => {
                let (_, rec) = d.forward(z)?;
                let (dz, g) = d.vjp(&rec, seed)?;
                Ok((dz, GroupGrad::Dense(g)))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            GroupHandle::Scnn(p) => p.param_count(),
            GroupHandle::Quadratic(q) => q.param_count(),
            GroupHandle::LinearMap(k) => k.len(),
            GroupHandle::Dense(d) => d.param_count(),
        }
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        match self {
            GroupHandle::Scnn(p) => p.push_params(out),
            GroupHandle::Quadratic(q) => q.push_params(out),
            GroupHandle::LinearMap(k) => out.extend(k.iter()),
            GroupHandle::Dense(d) => d.push_params(out),
        }
    }

    pub fn read_params<I: Iterator<Item = f64>>(&mut self, it: &mut I) -> Result<()> {
        match self {
            GroupHandle::Scnn(p) => p.read_params(it),
            GroupHandle::Quadratic(q) => q.read_params(it),
            GroupHandle::LinearMap(k) => {
                for dst in k.iter_mut() {
                    *dst = it
                        .next()
                        .ok_or_else(|| Error::Config("parameter vector too short".into()))?;
                }
                Ok(())
            }
            GroupHandle::Dense(d) => d.read_params(it),
        }
    }
}

/// Per-group parameter gradients, mirroring [`GroupHandle`].
#[derive(Debug, Clone)]
pub enum GroupGrad {
    Scnn(ScnnGrad),
    Quadratic(QuadraticGrad),
    LinearMap(Array2<f64>),
    Dense(DenseGrad),
}

impl GroupGrad {
    pub fn zeros_like(h: &GroupHandle) -> Self {
        match h {
            GroupHandle::Scnn(p) => GroupGrad::Scnn(ScnnGrad::zeros_like(p)),
            GroupHandle::Quadratic(q) => GroupGrad::Quadratic(QuadraticGrad {
                factor: Array2::zeros((q.dim(), q.dim())),
            }),
            GroupHandle::LinearMap(k) => GroupGrad::LinearMap(Array2::zeros(k.raw_dim())),
            GroupHandle::Dense(d) => GroupGrad::Dense(DenseGrad::zeros_like(d)),
        }
    }

    pub fn scaled_add(&mut self, other: &GroupGrad, s: f64) {
        match (self, other) {
            (GroupGrad::Scnn(a), GroupGrad::Scnn(b)) => a.scaled_add(b, s),
            (GroupGrad::Quadratic(a), GroupGrad::Quadratic(b)) => a.factor.scaled_add(s, &b.factor),
            (GroupGrad::LinearMap(a), GroupGrad::LinearMap(b)) => a.scaled_add(s, b),
            (GroupGrad::Dense(a), GroupGrad::Dense(b)) => a.scaled_add(b, s),
            _ => panic!("mismatched gradient kinds"),
        }
    }

    pub fn push_flat(&self, out: &mut Vec<f64>) {
        match self {
            GroupGrad::Scnn(g) => g.push_flat(out),
            GroupGrad::Quadratic(g) => out.extend(g.factor.iter()),
            GroupGrad::LinearMap(g) => out.extend(g.iter()),
            GroupGrad::Dense(g) => g.push_flat(out),
        }
    }
}

/// Sum of per-group maps over a communication partition.
#[derive(Debug, Clone)]
pub struct Operator {
    partition: CommPartition,
    handles: Vec<GroupHandle>,
}

/// Parameter gradients for every group of an operator.
pub type OperatorGrad = Vec<GroupGrad>;

impl Operator {
    pub fn new(partition: CommPartition, handles: Vec<GroupHandle>) -> Result<Self> {
        if partition.groups().len() != handles.len() {
            return Err(Error::Config(format!(
                "partition has {} groups but {} handles were supplied",
                partition.groups().len(),
                handles.len()
            )));
        }
        for (g, h) in partition.groups().iter().zip(&handles) {
            check_dim("group handle input", g.len(), h.dim())?;
        }
        Ok(Operator { partition, handles })
    }

    /// Strictly monotone operator: one convex network per partition group,
    /// plus a diagonal quadratic floor (`floor_gain`·z on each coordinate)
    /// added as singleton groups.
    ///
    /// The floor keeps every coordinate's range unbounded, so steady-state
    /// controls of any magnitude stay reachable no matter how small the
    /// network weights are; being diagonal it respects every communication
    /// pattern.
    pub fn neural_pi<R: Rng + ?Sized>(
        partition: &CommPartition,
        hidden: &[usize],
        floor_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let dim = partition.dim();
        let mut groups = partition.groups().to_vec();
        let mut handles: Vec<GroupHandle> = partition
            .groups()
            .iter()
            .map(|g| GroupHandle::Scnn(ScnnParams::new(g.len(), hidden, rng)))
            .collect();
        if floor_gain > 0.0 {
            for i in 0..dim {
                groups.push(vec![i]);
                handles.push(GroupHandle::Quadratic(QuadraticConvex::scaled_identity(
                    1,
                    floor_gain,
                    crate::scnn::HIDDEN_WEIGHT_EPS,
                )));
            }
        }
        Operator::new(CommPartition::new(dim, groups)?, handles)
    }

    /// Trainable symmetric-positive-definite linear gain over all indices.
    pub fn linear_pd(dim: usize, init_gain: f64) -> Result<Self> {
        Operator::new(
            CommPartition::full(dim),
            vec![GroupHandle::Quadratic(QuadraticConvex::scaled_identity(
                dim,
                init_gain,
                crate::scnn::HIDDEN_WEIGHT_EPS,
            ))],
        )
    }

    /// Raw trainable matrix gain (no symmetry or definiteness constraint).
    pub fn linear_unconstrained(dim: usize, init_gain: f64) -> Result<Self> {
        let k = Array2::from_diag(&Array1::from_elem(dim, init_gain));
        Operator::new(CommPartition::full(dim), vec![GroupHandle::LinearMap(k)])
    }

    /// Raw dense network over all indices (baseline without guarantees).
    pub fn dense<R: Rng + ?Sized>(dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        Operator::new(
            CommPartition::full(dim),
            vec![GroupHandle::Dense(DenseNet::new(dim, hidden, dim, rng))],
        )
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn partition(&self) -> &CommPartition {
        &self.partition
    }

    pub fn handles(&self) -> &[GroupHandle] {
        &self.handles
    }

    /// Σ_j scatter(group_j(gather(z))); uncovered coordinates stay zero.
    pub fn eval(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim("operator input", self.dim(), z.len())?;
        let mut out = Array1::<f64>::zeros(self.dim());
        for (g, h) in self.partition.groups().iter().zip(&self.handles) {
            let zloc = Array1::from_iter(g.iter().map(|&i| z[i]));
            let uloc = h.eval(&zloc)?;
            for (slot, &i) in g.iter().enumerate() {
                out[i] += uloc[slot];
            }
        }
        Ok(out)
    }

    /// Value of the summed convex function behind the operator.
    ///
    /// Errors when any group lacks one (raw linear / dense baselines).
    pub fn convex_value(&self, z: &Array1<f64>) -> Result<f64> {
        check_dim("operator input", self.dim(), z.len())?;
        let mut total = 0.0;
        for (g, h) in self.partition.groups().iter().zip(&self.handles) {
            let zloc = Array1::from_iter(g.iter().map(|&i| z[i]));
            total += h.convex_value(&zloc)?;
        }
        Ok(total)
    }

    /// Reverse pass for `seedᵀ·operator(z)`: returns the input adjoint and
    /// per-group parameter gradients.
    pub fn vjp(&self, z: &Array1<f64>, seed: &Array1<f64>) -> Result<(Array1<f64>, OperatorGrad)> {
        check_dim("operator input", self.dim(), z.len())?;
        check_dim("operator seed", self.dim(), seed.len())?;
        let mut dz = Array1::<f64>::zeros(self.dim());
        let mut grads = Vec::with_capacity(self.handles.len());
        for (g, h) in self.partition.groups().iter().zip(&self.handles) {
            let zloc = Array1::from_iter(g.iter().map(|&i| z[i]));
            let sloc = Array1::from_iter(g.iter().map(|&i| seed[i]));
            let (dzloc, grad) = h.vjp(&zloc, &sloc)?;
            for (slot, &i) in g.iter().enumerate() {
                dz[i] += dzloc[slot];
            }
            grads.push(grad);
        }
        Ok((dz, grads))
    }

    pub fn zero_grad(&self) -> OperatorGrad {
        self.handles.iter().map(GroupGrad::zeros_like).collect()
    }

    pub fn param_count(&self) -> usize {
        self.handles.iter().map(GroupHandle::param_count).sum()
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        for h in &self.handles {
            h.push_params(out);
        }
    }

    pub fn read_params<I: Iterator<Item = f64>>(&mut self, it: &mut I) -> Result<()> {
        for h in &mut self.handles {
            h.read_params(it)?;
        }
        Ok(())
    }
}

/// Inner-product audit of (q(η) − q(ξ))ᵀ(η − ξ) over given pairs.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub inner_products: Vec<f64>,
    pub min_inner: f64,
    pub pass: bool,
}

/// The report passes iff every inner product is ≥ −1e−12 and every pair with
/// ‖η−ξ‖ > 1e−6 has a strictly positive inner product.
pub fn monotonicity_probe(
    op: &Operator,
    pairs: &[(Array1<f64>, Array1<f64>)],
) -> Result<MonotonicityReport> {
    let mut inner_products = Vec::with_capacity(pairs.len());
    let mut pass = true;
    let mut min_inner = f64::INFINITY;
    for (eta, xi) in pairs {
        let d = eta - xi;
        let inner = (&op.eval(eta)? - &op.eval(xi)?).dot(&d);
        if inner < -1e-12 {
            pass = false;
        }
        if d.dot(&d).sqrt() > 1e-6 && inner <= 0.0 {
            pass = false;
        }
        min_inner = min_inner.min(inner);
        inner_products.push(inner);
    }
    if pairs.is_empty() {
        min_inner = 0.0;
    }
    Ok(MonotonicityReport {
        inner_products,
        min_inner,
        pass,
    })
}

/// Generalized PI controller `u = p(ȳ − y) + r(s)`, with the integral state
/// driven by `ṡ = −(y − ȳ)`.
#[derive(Debug, Clone)]
pub struct PiController {
    p_op: Operator,
    r_op: Operator,
    setpoint: Array1<f64>,
    s: Array1<f64>,
}

/// Parameter gradients for both operators of a [`PiController`].
#[derive(Debug, Clone)]
pub struct PiGrad {
    pub p: OperatorGrad,
    pub r: OperatorGrad,
}

impl PiGrad {
    pub fn scaled_add(&mut self, other: &PiGrad, s: f64) {
        for (a, b) in self.p.iter_mut().zip(&other.p) {
            a.scaled_add(b, s);
        }
        for (a, b) in self.r.iter_mut().zip(&other.r) {
            a.scaled_add(b, s);
        }
    }

    pub fn push_flat(&self, out: &mut Vec<f64>) {
        for g in &self.p {
            g.push_flat(out);
        }
        for g in &self.r {
            g.push_flat(out);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.push_flat(&mut v);
        v
    }
}

impl PiController {
    pub fn new(p_op: Operator, r_op: Operator, setpoint: Array1<f64>) -> Result<Self> {
        let m = setpoint.len();
        check_dim("proportional operator", m, p_op.dim())?;
        check_dim("integral operator", m, r_op.dim())?;
        Ok(PiController {
            p_op,
            r_op,
            setpoint,
            s: Array1::zeros(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.setpoint.len()
    }

    pub fn proportional(&self) -> &Operator {
        &self.p_op
    }

    pub fn integral(&self) -> &Operator {
        &self.r_op
    }

    pub fn setpoint(&self) -> &Array1<f64> {
        &self.setpoint
    }

    pub fn set_setpoint(&mut self, setpoint: Array1<f64>) -> Result<()> {
        check_dim("setpoint", self.dim(), setpoint.len())?;
        self.setpoint = setpoint;
        Ok(())
    }

    pub fn integral_state(&self) -> &Array1<f64> {
        &self.s
    }

    pub fn set_integral_state(&mut self, s: Array1<f64>) -> Result<()> {
        check_dim("integral state", self.dim(), s.len())?;
        self.s = s;
        Ok(())
    }

    pub fn reset_integral(&mut self) {
        self.s.fill(0.0);
    }

    /// `u = p(ȳ − y) + r(s)`; pure read of the integral state.
    pub fn control(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim("controller output measurement", self.dim(), y.len())?;
        let err = &self.setpoint - y;
        Ok(self.p_op.eval(&err)? + &self.r_op.eval(&self.s)?)
    }

    /// Explicit Euler update `s ← s + Δt (ȳ − y)`.
    pub fn integral_step(&mut self, y: &Array1<f64>, dt: f64) -> Result<()> {
        check_dim("controller output measurement", self.dim(), y.len())?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let err = &self.setpoint - y;
        self.s.scaled_add(dt, &err);
        Ok(())
    }

    pub fn zero_grad(&self) -> PiGrad {
        PiGrad {
            p: self.p_op.zero_grad(),
            r: self.r_op.zero_grad(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.p_op.param_count() + self.r_op.param_count()
    }

    pub fn params_to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        self.p_op.push_params(&mut v);
        self.r_op.push_params(&mut v);
        v
    }

    pub fn set_params_from_slice(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        self.p_op.read_params(&mut it)?;
        self.r_op.read_params(&mut it)?;
        Ok(())
    }
}
