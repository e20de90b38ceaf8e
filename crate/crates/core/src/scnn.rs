//! Strictly convex scalar-valued networks and their gradients.
//!
//! A network `g(z)` is built from the layer recursion
//! `o_{l+1} = σ(W_l^{(o)} o_l + W_l^{(z)} z + b_l)` with `o_0 = 0`, a scalar
//! last layer, softplus-β activations, and strictly positive hidden-path
//! weights. Under those constraints `g` is strictly convex in `z`, so its
//! input gradient is a strictly monotone map — the controller primitive used
//! throughout this crate.
//!
//! Positivity of the hidden weights survives arbitrary optimizer steps
//! because they are stored as unconstrained pre-parameters and mapped through
//! `softplus(·) + ε`; β is stored through `exp(·)`. All parameter gradients
//! here are hand-derived reverse passes, including the second-order path for
//! losses that depend on the input gradient itself.

use crate::error::{check_dim, Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;

/// Floor added to softplus-mapped hidden weights; keeps them strictly positive.
pub const HIDDEN_WEIGHT_EPS: f64 = 1e-6;

/// Default activation sharpness at initialization.
pub const DEFAULT_BETA: f64 = 5.0;

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

/// Overflow-safe softplus-β: `(1/β)·log(1 + e^{βx})`.
///
/// Computed as `max(x,0) + (1/β)·log1p(e^{−β|x|})`, valid for any finite βx.
pub fn softplus_beta(beta: f64, x: f64) -> f64 {
    x.max(0.0) + (-beta * x.abs()).exp().ln_1p() / beta
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// σ'_β(x) = sigmoid(βx)
fn softplus_beta_d1(beta: f64, x: f64) -> f64 {
    sigmoid(beta * x)
}

/// σ''_β(x) = β·s·(1−s) with s = sigmoid(βx)
fn softplus_beta_d2(beta: f64, x: f64) -> f64 {
    let s = sigmoid(beta * x);
    beta * s * (1.0 - s)
}

/// ∂σ_β(x)/∂β = (x·s − σ_β(x)) / β
fn softplus_beta_dbeta(beta: f64, x: f64) -> f64 {
    (x * sigmoid(beta * x) - softplus_beta(beta, x)) / beta
}

/// ∂σ'_β(x)/∂β = x·s·(1−s)
fn softplus_beta_d1_dbeta(beta: f64, x: f64) -> f64 {
    let s = sigmoid(beta * x);
    x * s * (1.0 - s)
}

/// Scalar activation kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// Strictly convex, strictly increasing; approaches ReLU as β → ∞.
    SoftplusBeta(f64),
    Relu,
}

impl Activation {
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("activation input not finite: {x}")));
        }
        match *self {
            Activation::SoftplusBeta(beta) => {
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(Error::Domain(format!("softplus-β requires β > 0, got {beta}")));
                }
                Ok(softplus_beta(beta, x))
            }
            Activation::Relu => Ok(x.max(0.0)),
        }
    }
}

/// `σ_β(x+Δ) − relu(x)`, computed without cancellation.
///
/// For any finite `x` the exact value lies in the open interval
/// `(0, Δ + log(2)/β)`. For `β(x+Δ)` far below the representable exponent
/// range the returned value underflows to 0.0 even though the exact value is
/// positive.
pub fn softplus_relu_gap(beta: f64, x: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0) || !(delta > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "softplus_relu_gap requires β > 0, Δ > 0, finite x (β={beta}, Δ={delta}, x={x})"
        )));
    }
    let xd = x + delta;
    if x >= 0.0 {
        // σ(x+Δ) − x = Δ + log1p(e^{−β(x+Δ)})/β, both terms positive
        Ok(delta + (-beta * xd).exp().ln_1p() / beta)
    } else {
        // relu(x) = 0
        Ok(softplus_beta(beta, xd))
    }
}

// ---------------------------------------------------------------------------
// strictly convex network
// ---------------------------------------------------------------------------

/// Parameters of one strictly convex scalar network.
///
/// Hidden weights and β are exposed in their effective (constrained) form;
/// the unconstrained pre-parameters are what flows through optimizers and
/// checkpoints.
#[derive(Debug, Clone)]
pub struct ScnnParams {
    input_dim: usize,
    /// W_l^{(z)}, one per layer l = 0..k
    w_input: Vec<Array2<f64>>,
    /// pre-parameters of W_l^{(o)} for l = 1..k (entry l−1)
    w_hidden_pre: Vec<Array2<f64>>,
    /// softplus(pre) + ε, kept in sync with `w_hidden_pre`
    w_hidden: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    beta_pre: f64,
    beta: f64,
}

/// Pre-activations and layer outputs of one forward pass, kept for gradient
/// replay.
#[derive(Debug, Clone)]
pub struct ForwardRecord {
    pub input: Array1<f64>,
    /// a_l for l = 0..k
    pub pre: Vec<Array1<f64>>,
    /// o_{l+1} for l = 0..k (so `outs[k-1]` is the scalar output)
    pub outs: Vec<Array1<f64>>,
}

impl ForwardRecord {
    pub fn value(&self) -> f64 {
        self.outs.last().map(|o| o[0]).unwrap_or(f64::NAN)
    }
}

/// Gradients with respect to the trainable pre-parameters of an [`ScnnParams`].
#[derive(Debug, Clone)]
pub struct ScnnGrad {
    pub w_input: Vec<Array2<f64>>,
    pub w_hidden_pre: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub beta_pre: f64,
}

fn softplus_inv(t: f64) -> f64 {
    // inverse of x ↦ log(1+e^x); t must be positive
    if t > 30.0 {
        t
    } else {
        (t.exp() - 1.0).ln()
    }
}

impl ScnnParams {
    /// Fresh network with `hidden` layer widths and a scalar output layer.
    ///
    /// Input weights are uniform on ±1/√fan_in, hidden weights start near
    /// 1/fan_in, biases at zero and β at [`DEFAULT_BETA`].
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        Self::with_scale(input_dim, hidden, 1.0, rng)
    }

    /// Like [`ScnnParams::new`] with the input-weight range scaled by `gain`.
    pub fn with_scale<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(input_dim > 0, "input_dim must be positive");
        let mut dims: Vec<usize> = hidden.to_vec();
        dims.push(1);
        let k = dims.len();
        let mut w_input = Vec::with_capacity(k);
        let mut w_hidden_pre = Vec::with_capacity(k.saturating_sub(1));
        let mut biases = Vec::with_capacity(k);
        for l in 0..k {
            let prev = if l == 0 { 0 } else { dims[l - 1] };
            let fan_in = (input_dim + prev) as f64;
            let a = gain / fan_in.sqrt();
            let rows = dims[l];
            let w = Array2::from_shape_fn((rows, input_dim), |_| rng.random_range(-a..a));
            w_input.push(w);
            if l > 0 {
                let pre = softplus_inv((1.0 / fan_in - HIDDEN_WEIGHT_EPS).max(1e-12));
                w_hidden_pre.push(Array2::from_elem((rows, prev), pre));
            }
            biases.push(Array1::zeros(rows));
        }
        let mut p = ScnnParams {
            input_dim,
            w_input,
            w_hidden_pre,
            w_hidden: Vec::new(),
            biases,
            beta_pre: DEFAULT_BETA.ln(),
            beta: DEFAULT_BETA,
        };
        p.refresh_derived();
        p
    }

    /// Build from explicit parts (used by checkpoints and tests).
    pub fn from_raw(
        input_dim: usize,
        w_input: Vec<Array2<f64>>,
        w_hidden_pre: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        beta_pre: f64,
    ) -> Result<Self> {
        let k = w_input.len();
        if k == 0 || w_hidden_pre.len() != k - 1 || biases.len() != k {
            return Err(Error::Config(
                "inconsistent layer counts for strictly convex network".into(),
            ));
        }
        for (l, w) in w_input.iter().enumerate() {
            check_dim("scnn input weight cols", input_dim, w.ncols())?;
            check_dim("scnn bias rows", w.nrows(), biases[l].len())?;
            if l > 0 {
                check_dim("scnn hidden rows", w.nrows(), w_hidden_pre[l - 1].nrows())?;
                check_dim(
                    "scnn hidden cols",
                    w_input[l - 1].nrows(),
                    w_hidden_pre[l - 1].ncols(),
                )?;
            }
        }
        if w_input[k - 1].nrows() != 1 {
            return Err(Error::Config("scnn output layer must be scalar".into()));
        }
        let all_finite = w_input.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && w_hidden_pre.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
            && beta_pre.is_finite();
        if !all_finite {
            return Err(Error::Domain("non-finite network parameter".into()));
        }
        let mut p = ScnnParams {
            input_dim,
            w_input,
            w_hidden_pre,
            w_hidden: Vec::new(),
            biases,
            beta_pre,
            beta: 0.0,
        };
        p.refresh_derived();
        Ok(p)
    }

    fn refresh_derived(&mut self) {
        self.beta = self.beta_pre.exp();
        self.w_hidden = self
            .w_hidden_pre
            .iter()
            .map(|w| w.mapv(|v| softplus_beta(1.0, v) + HIDDEN_WEIGHT_EPS))
            .collect();
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layer_count(&self) -> usize {
        self.w_input.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_pre(&self) -> f64 {
        self.beta_pre
    }

    pub fn input_weights(&self) -> &[Array2<f64>] {
        &self.w_input
    }

    pub fn hidden_pre(&self) -> &[Array2<f64>] {
        &self.w_hidden_pre
    }

    /// Effective (strictly positive) hidden-path weights.
    pub fn hidden_weights(&self) -> &[Array2<f64>] {
        &self.w_hidden
    }

    pub fn bias_vectors(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Forward evaluation; returns the scalar value and the replay record.
    pub fn forward(&self, z: &Array1<f64>) -> Result<(f64, ForwardRecord)> {
        check_dim("scnn input", self.input_dim, z.len())?;
        let k = self.layer_count();
        let mut pre = Vec::with_capacity(k);
        let mut outs = Vec::with_capacity(k);
        for l in 0..k {
            let mut a = self.w_input[l].dot(z) + &self.biases[l];
            if l > 0 {
                a = a + self.w_hidden[l - 1].dot(&outs[l - 1]);
            }
            let o = a.mapv(|x| softplus_beta(self.beta, x));
            pre.push(a);
            outs.push(o);
        }
        let value = outs[k - 1][0];
        Ok((
            value,
            ForwardRecord {
                input: z.clone(),
                pre,
                outs,
            },
        ))
    }

    /// Analytic ∇_z g from a recorded forward pass.
    pub fn input_gradient(&self, rec: &ForwardRecord) -> Array1<f64> {
        let k = self.layer_count();
        let mut grad = Array1::<f64>::zeros(self.input_dim);
        // adjoint on o_{l+1}, starting from the scalar output
        let mut t = Array1::<f64>::ones(1);
        for l in (0..k).rev() {
            let sp = rec.pre[l].mapv(|x| softplus_beta_d1(self.beta, x));
            let q = &t * &sp; // adjoint on a_l
            grad = grad + self.w_input[l].t().dot(&q);
            if l > 0 {
                t = self.w_hidden[l - 1].t().dot(&q);
            }
        }
        grad
    }

    /// Convenience: value and input gradient at `z`.
    pub fn value_and_grad(&self, z: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        let (v, rec) = self.forward(z)?;
        Ok((v, self.input_gradient(&rec)))
    }

    /// Reverse pass for `Φ = value_seed·g(z) + grad_seedᵀ·∇_z g(z)`.
    ///
    /// Returns `(∂Φ/∂z, ∂Φ/∂pre-parameters)`. The grad-seed path carries the
    /// second-order terms (Hessian-vector product in the returned input
    /// adjoint) needed when a loss depends on the network's input gradient.
    pub fn vjp(
        &self,
        rec: &ForwardRecord,
        value_seed: f64,
        grad_seed: Option<&Array1<f64>>,
    ) -> Result<(Array1<f64>, ScnnGrad)> {
        let k = self.layer_count();
        let beta = self.beta;
        let z = &rec.input;

        // tangent pass along the grad seed: v_{l+1} = σ'(a_l) ⊙ ȧ_l
        let mut adots: Vec<Array1<f64>> = Vec::new();
        let mut vs: Vec<Array1<f64>> = Vec::new();
        if let Some(c) = grad_seed {
            check_dim("scnn grad seed", self.input_dim, c.len())?;
            for l in 0..k {
                let mut adot = self.w_input[l].dot(c);
                if l > 0 {
                    adot = adot + self.w_hidden[l - 1].dot(&vs[l - 1]);
                }
                let v = rec.pre[l]
                    .iter()
                    .zip(adot.iter())
                    .map(|(&a, &ad)| softplus_beta_d1(beta, a) * ad)
                    .collect::<Array1<f64>>();
                adots.push(adot);
                vs.push(v);
            }
        }

        let mut grad = ScnnGrad::zeros_like(self);
        let mut dz = Array1::<f64>::zeros(self.input_dim);
        let mut dbeta = 0.0;

        // adjoints on o_{l+1} and (tangent) v_{l+1}
        let mut po = Array1::<f64>::from_elem(1, value_seed);
        let mut vv = if grad_seed.is_some() {
            Some(Array1::<f64>::ones(1))
        } else {
            None
        };

        for l in (0..k).rev() {
            let a = &rec.pre[l];
            let sp = a.mapv(|x| softplus_beta_d1(beta, x));

            // adjoint on a_l: value path through σ, tangent path through σ''
            let mut pa = &po * &sp;
            let mut va: Option<Array1<f64>> = None;
            if let Some(ref vvl) = vv {
                let spp = a.mapv(|x| softplus_beta_d2(beta, x));
                pa = pa + vvl * &spp * &adots[l];
                va = Some(vvl * &sp);
                for (j, &x) in a.iter().enumerate() {
                    dbeta += vvl[j] * adots[l][j] * softplus_beta_d1_dbeta(beta, x);
                }
            }
            for (j, &x) in a.iter().enumerate() {
                dbeta += po[j] * softplus_beta_dbeta(beta, x);
            }

            crate::linalg::add_scaled_outer(&mut grad.w_input[l], 1.0, pa.view(), z.view());
            grad.biases[l] = &grad.biases[l] + &pa;
            dz = dz + self.w_input[l].t().dot(&pa);
            if let Some(ref val) = va {
                crate::linalg::add_scaled_outer(
                    &mut grad.w_input[l],
                    1.0,
                    val.view(),
                    grad_seed.unwrap().view(),
                );
            }

            if l > 0 {
                // effective-weight gradients, mapped to pre-parameters below
                let o_prev = &rec.outs[l - 1];
                crate::linalg::add_scaled_outer(
                    &mut grad.w_hidden_pre[l - 1],
                    1.0,
                    pa.view(),
                    o_prev.view(),
                );
                po = self.w_hidden[l - 1].t().dot(&pa);
                if let Some(ref val) = va {
                    crate::linalg::add_scaled_outer(
                        &mut grad.w_hidden_pre[l - 1],
                        1.0,
                        val.view(),
                        vs[l - 1].view(),
                    );
                    vv = Some(self.w_hidden[l - 1].t().dot(val));
                }
            }
        }

        // chain through the positivity map W = softplus(pre) + ε and β = e^pre
        for (gw, pre) in grad.w_hidden_pre.iter_mut().zip(self.w_hidden_pre.iter()) {
            ndarray::Zip::from(gw).and(pre).for_each(|g, &p| {
                *g *= sigmoid(p);
            });
        }
        grad.beta_pre = dbeta * beta;
        Ok((dz, grad))
    }

    pub fn param_count(&self) -> usize {
        let mut n = 1; // beta_pre
        for w in &self.w_input {
            n += w.len();
        }
        for w in &self.w_hidden_pre {
            n += w.len();
        }
        for b in &self.biases {
            n += b.len();
        }
        n
    }

    /// Append the trainable pre-parameters in canonical order.
    pub fn push_params(&self, out: &mut Vec<f64>) {
        for w in &self.w_input {
            out.extend(w.iter());
        }
        for w in &self.w_hidden_pre {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out.push(self.beta_pre);
    }

    /// Rebuild from a flat iterator written by [`ScnnParams::push_params`].
    pub fn read_params<I: Iterator<Item = f64>>(&mut self, it: &mut I) -> Result<()> {
        let take = |n: usize, it: &mut I| -> Result<Vec<f64>> {
            let v: Vec<f64> = it.take(n).collect();
            if v.len() != n {
                return Err(Error::Config("parameter vector too short".into()));
            }
            Ok(v)
        };
        for w in &mut self.w_input {
            let vals = take(w.len(), it)?;
            for (dst, src) in w.iter_mut().zip(vals) {
                *dst = src;
            }
        }
        for w in &mut self.w_hidden_pre {
            let vals = take(w.len(), it)?;
            for (dst, src) in w.iter_mut().zip(vals) {
                *dst = src;
            }
        }
        for b in &mut self.biases {
            let vals = take(b.len(), it)?;
            for (dst, src) in b.iter_mut().zip(vals) {
                *dst = src;
            }
        }
        self.beta_pre = it
            .next()
            .ok_or_else(|| Error::Config("parameter vector too short".into()))?;
        self.refresh_derived();
        Ok(())
    }
}

impl ScnnGrad {
    pub fn zeros_like(p: &ScnnParams) -> Self {
        ScnnGrad {
            w_input: p.w_input.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            w_hidden_pre: p
                .w_hidden_pre
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            beta_pre: 0.0,
        }
    }

    pub fn scaled_add(&mut self, other: &ScnnGrad, s: f64) {
        for (a, b) in self.w_input.iter_mut().zip(&other.w_input) {
            a.scaled_add(s, b);
        }
        for (a, b) in self.w_hidden_pre.iter_mut().zip(&other.w_hidden_pre) {
            a.scaled_add(s, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.scaled_add(s, b);
        }
        self.beta_pre += s * other.beta_pre;
    }

    /// Same canonical order as [`ScnnParams::push_params`].
    pub fn push_flat(&self, out: &mut Vec<f64>) {
        for w in &self.w_input {
            out.extend(w.iter());
        }
        for w in &self.w_hidden_pre {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out.push(self.beta_pre);
    }
}

// ---------------------------------------------------------------------------
// quadratic convex handle
// ---------------------------------------------------------------------------

/// `g(z) = ½ zᵀ K z` with `K = L Lᵀ + shift·I`, symmetric positive definite
/// for any factor `L` whenever `shift > 0`.
///
/// Usable wherever a strictly convex network is, so linear PI control is one
/// configuration of the same controller machinery.
#[derive(Debug, Clone)]
pub struct QuadraticConvex {
    factor: Array2<f64>,
    shift: f64,
    k_eff: Array2<f64>,
}

/// Gradient with respect to the factor `L`.
#[derive(Debug, Clone)]
pub struct QuadraticGrad {
    pub factor: Array2<f64>,
}

impl QuadraticConvex {
    /// Trainable handle with `K = gain·I` initially.
    pub fn scaled_identity(dim: usize, gain: f64, shift: f64) -> Self {
        assert!(gain > 0.0 && shift >= 0.0);
        let factor = Array2::from_diag(&Array1::from_elem(dim, gain.sqrt()));
        let mut q = QuadraticConvex {
            factor,
            shift,
            k_eff: Array2::zeros((dim, dim)),
        };
        q.refresh_derived();
        q
    }

    /// Wrap an explicit symmetric positive-definite matrix exactly.
    pub fn from_spd(k: &Array2<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::shape("quadratic matrix", n, k.ncols()));
        }
        for i in 0..n {
            for j in 0..i {
                if (k[[i, j]] - k[[j, i]]).abs() > 1e-10 * (1.0 + k[[i, j]].abs()) {
                    return Err(Error::Domain("quadratic matrix must be symmetric".into()));
                }
            }
        }
        let l = crate::linalg::cholesky(k)
            .ok_or_else(|| Error::Domain("quadratic matrix must be positive definite".into()))?;
        let mut q = QuadraticConvex {
            factor: l,
            shift: 0.0,
            k_eff: Array2::zeros((n, n)),
        };
        q.refresh_derived();
        Ok(q)
    }

    fn refresh_derived(&mut self) {
        let n = self.dim();
        let mut k = self.factor.dot(&self.factor.t());
        for i in 0..n {
            k[[i, i]] += self.shift;
        }
        self.k_eff = k;
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.k_eff
    }

    pub fn value(&self, z: &Array1<f64>) -> Result<f64> {
        check_dim("quadratic input", self.dim(), z.len())?;
        Ok(0.5 * z.dot(&self.k_eff.dot(z)))
    }

    pub fn eval(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim("quadratic input", self.dim(), z.len())?;
        Ok(self.k_eff.dot(z))
    }

    /// Reverse pass for `Φ = value_seed·g(z) + grad_seedᵀ·Kz`.
    pub fn vjp(
        &self,
        z: &Array1<f64>,
        value_seed: f64,
        grad_seed: Option<&Array1<f64>>,
    ) -> Result<(Array1<f64>, QuadraticGrad)> {
        check_dim("quadratic input", self.dim(), z.len())?;
        let n = self.dim();
        let mut dz = Array1::<f64>::zeros(n);
        let mut dl = Array2::<f64>::zeros((n, n));
        if value_seed != 0.0 {
            dz.scaled_add(value_seed, &self.k_eff.dot(z));
            // ∂(½zᵀLLᵀz)/∂L = z zᵀ L
            let ztl = z.dot(&self.factor); // zᵀL
            crate::linalg::add_scaled_outer(&mut dl, value_seed, z.view(), ztl.view());
        }
        if let Some(c) = grad_seed {
            check_dim("quadratic grad seed", n, c.len())?;
            dz = dz + self.k_eff.dot(c); // K symmetric
            let ztl = z.dot(&self.factor);
            let ctl = c.dot(&self.factor);
            crate::linalg::add_scaled_outer(&mut dl, 1.0, c.view(), ztl.view());
            crate::linalg::add_scaled_outer(&mut dl, 1.0, z.view(), ctl.view());
        }
        Ok((dz, QuadraticGrad { factor: dl }))
    }

    pub fn param_count(&self) -> usize {
        self.factor.len()
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        out.extend(self.factor.iter());
    }

    pub fn read_params<I: Iterator<Item = f64>>(&mut self, it: &mut I) -> Result<()> {
        let vals: Vec<f64> = it.take(self.factor.len()).collect();
        if vals.len() != self.factor.len() {
            return Err(Error::Config("parameter vector too short".into()));
        }
        for (dst, src) in self.factor.iter_mut().zip(vals) {
            *dst = src;
        }
        self.refresh_derived();
        Ok(())
    }

    pub fn factor(&self) -> &Array2<f64> {
        &self.factor
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn from_parts(factor: Array2<f64>, shift: f64) -> Self {
        let n = factor.nrows();
        let mut q = QuadraticConvex {
            factor,
            shift,
            k_eff: Array2::zeros((n, n)),
        };
        q.refresh_derived();
        q
    }
}

/// Convex-function handle `g(z) = ½ zᵀKz` for an explicit SPD `K`.
///
/// Rejects non-symmetric or non-positive-definite matrices.
pub fn quadratic_convex(k: &Array2<f64>) -> Result<QuadraticConvex> {
    QuadraticConvex::from_spd(k)
}

// ---------------------------------------------------------------------------
// dense baseline network
// ---------------------------------------------------------------------------

/// Unconstrained feed-forward net with the same skip structure as the convex
/// network but a vector-valued linear output layer. Used by the DenseNN-PI
/// baseline, which applies the raw network output as the control term.
#[derive(Debug, Clone)]
pub struct DenseNet {
    input_dim: usize,
    output_dim: usize,
    w_input: Vec<Array2<f64>>,
    /// raw (unconstrained) hidden-path weights, l = 1..k
    w_hidden: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    beta_pre: f64,
    beta: f64,
}

#[derive(Debug, Clone)]
pub struct DenseRecord {
    pub input: Array1<f64>,
    pub pre: Vec<Array1<f64>>,
    /// hidden outputs o_1..o_{k-1}
    pub outs: Vec<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub w_input: Vec<Array2<f64>>,
    pub w_hidden: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub beta_pre: f64,
}

impl DenseNet {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims: Vec<usize> = hidden.to_vec();
        dims.push(output_dim);
        let k = dims.len();
        let mut w_input = Vec::with_capacity(k);
        let mut w_hidden = Vec::with_capacity(k - 1);
        let mut biases = Vec::with_capacity(k);
        for l in 0..k {
            let prev = if l == 0 { 0 } else { dims[l - 1] };
            let fan_in = (input_dim + prev) as f64;
            let a = 1.0 / fan_in.sqrt();
            w_input.push(Array2::from_shape_fn((dims[l], input_dim), |_| {
                rng.random_range(-a..a)
            }));
            if l > 0 {
                w_hidden.push(Array2::from_shape_fn((dims[l], prev), |_| {
                    rng.random_range(-a..a)
                }));
            }
            biases.push(Array1::zeros(dims[l]));
        }
        DenseNet {
            input_dim,
            output_dim,
            w_input,
            w_hidden,
            biases,
            beta_pre: DEFAULT_BETA.ln(),
            beta: DEFAULT_BETA,
        }
    }

    pub fn from_raw(
        input_dim: usize,
        output_dim: usize,
        w_input: Vec<Array2<f64>>,
        w_hidden: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        beta_pre: f64,
    ) -> Result<Self> {
        let k = w_input.len();
        if k == 0 || w_hidden.len() != k - 1 || biases.len() != k {
            return Err(Error::Config("inconsistent dense-net layer counts".into()));
        }
        if w_input[k - 1].nrows() != output_dim {
            return Err(Error::shape(
                "dense output layer",
                output_dim,
                w_input[k - 1].nrows(),
            ));
        }
        Ok(DenseNet {
            input_dim,
            output_dim,
            w_input,
            w_hidden,
            biases,
            beta_pre,
            beta: beta_pre.exp(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layer_count(&self) -> usize {
        self.w_input.len()
    }

    pub fn beta_pre(&self) -> f64 {
        self.beta_pre
    }

    pub fn input_weights(&self) -> &[Array2<f64>] {
        &self.w_input
    }

    pub fn hidden_weights(&self) -> &[Array2<f64>] {
        &self.w_hidden
    }

    pub fn bias_vectors(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn forward(&self, z: &Array1<f64>) -> Result<(Array1<f64>, DenseRecord)> {
        check_dim("dense input", self.input_dim, z.len())?;
        let k = self.layer_count();
        let mut pre = Vec::with_capacity(k);
        let mut outs = Vec::with_capacity(k - 1);
        for l in 0..k {
            let mut a = self.w_input[l].dot(z) + &self.biases[l];
            if l > 0 {
                a = a + self.w_hidden[l - 1].dot(&outs[l - 1]);
            }
            if l < k - 1 {
                outs.push(a.mapv(|x| softplus_beta(self.beta, x)));
            }
            pre.push(a);
        }
        let out = pre[k - 1].clone();
        Ok((
            out,
            DenseRecord {
                input: z.clone(),
                pre,
                outs,
            },
        ))
    }

    /// Reverse pass for `Φ = seedᵀ·net(z)`; returns `(Jᵀ seed, param grads)`.
    pub fn vjp(&self, rec: &DenseRecord, seed: &Array1<f64>) -> Result<(Array1<f64>, DenseGrad)> {
        check_dim("dense seed", self.output_dim, seed.len())?;
        let k = self.layer_count();
        let z = &rec.input;
        let mut grad = DenseGrad::zeros_like(self);
        let mut dz = Array1::<f64>::zeros(self.input_dim);
        let mut dbeta = 0.0;
        // adjoint on a_l; the output layer is linear
        let mut q = seed.clone();
        for l in (0..k).rev() {
            crate::linalg::add_scaled_outer(&mut grad.w_input[l], 1.0, q.view(), z.view());
            grad.biases[l] = &grad.biases[l] + &q;
            dz = dz + self.w_input[l].t().dot(&q);
            if l > 0 {
                let o_prev = &rec.outs[l - 1];
                crate::linalg::add_scaled_outer(&mut grad.w_hidden[l - 1], 1.0, q.view(), o_prev.view());
                let t = self.w_hidden[l - 1].t().dot(&q); // adjoint on o_l
                let a_prev = &rec.pre[l - 1];
                for (j, &x) in a_prev.iter().enumerate() {
                    dbeta += t[j] * softplus_beta_dbeta(self.beta, x);
                }
                q = a_prev
                    .iter()
                    .zip(t.iter())
                    .map(|(&x, &tj)| tj * softplus_beta_d1(self.beta, x))
                    .collect::<Array1<f64>>();
            }
        }
        grad.beta_pre = dbeta * self.beta;
        Ok((dz, grad))
    }

    pub fn param_count(&self) -> usize {
        let mut n = 1;
        for w in &self.w_input {
            n += w.len();
        }
        for w in &self.w_hidden {
            n += w.len();
        }
        for b in &self.biases {
            n += b.len();
        }
        n
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        for w in &self.w_input {
            out.extend(w.iter());
        }
        for w in &self.w_hidden {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out.push(self.beta_pre);
    }

    pub fn read_params<I: Iterator<Item = f64>>(&mut self, it: &mut I) -> Result<()> {
        for w in self.w_input.iter_mut().chain(self.w_hidden.iter_mut()) {
            for dst in w.iter_mut() {
                *dst = it
                    .next()
                    .ok_or_else(|| Error::Config("parameter vector too short".into()))?;
            }
        }
        for b in &mut self.biases {
            for dst in b.iter_mut() {
                *dst = it
                    .next()
                    .ok_or_else(|| Error::Config("parameter vector too short".into()))?;
            }
        }
        self.beta_pre = it
            .next()
            .ok_or_else(|| Error::Config("parameter vector too short".into()))?;
        self.beta = self.beta_pre.exp();
        Ok(())
    }
}

impl DenseGrad {
    pub fn zeros_like(p: &DenseNet) -> Self {
        DenseGrad {
            w_input: p.w_input.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            w_hidden: p.w_hidden.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            beta_pre: 0.0,
        }
    }

    pub fn scaled_add(&mut self, other: &DenseGrad, s: f64) {
        for (a, b) in self.w_input.iter_mut().zip(&other.w_input) {
            a.scaled_add(s, b);
        }
        for (a, b) in self.w_hidden.iter_mut().zip(&other.w_hidden) {
            a.scaled_add(s, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.scaled_add(s, b);
        }
        self.beta_pre += s * other.beta_pre;
    }

    pub fn push_flat(&self, out: &mut Vec<f64>) {
        for w in &self.w_input {
            out.extend(w.iter());
        }
        for w in &self.w_hidden {
            out.extend(w.iter());
        }
        for b in &self.biases {
            out.extend(b.iter());
        }
        out.push(self.beta_pre);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_vec(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
        Array1::from_shape_fn(n, |_| rng.random_range(lo..hi))
    }

    /// Independent straightforward recursion, kept free of the production
    /// forward path; mirrors the layer equations with plain loops.
    fn naive_forward(p: &ScnnParams, z: &Array1<f64>) -> f64 {
        let beta = p.beta();
        let k = p.layer_count();
        let mut o: Vec<f64> = Vec::new();
        for l in 0..k {
            let wz = p.input_weights()[l].clone();
            let rows = wz.nrows();
            let mut next = vec![0.0; rows];
            for r in 0..rows {
                let mut acc = p.bias_vectors()[l][r];
                for c in 0..z.len() {
                    acc += wz[[r, c]] * z[c];
                }
                if l > 0 {
                    let wh = &p.hidden_weights()[l - 1];
                    for c in 0..o.len() {
                        acc += wh[[r, c]] * o[c];
                    }
                }
                next[r] = softplus_beta(beta, acc);
            }
            o = next;
        }
        o[0]
    }

    #[test]
    fn activation_closed_forms() {
        let sp = Activation::SoftplusBeta(1.0);
        assert!((sp.eval(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(Activation::Relu.eval(-3.0).unwrap(), 0.0);
        // saturation regime with the overflow-safe formula
        let v = Activation::SoftplusBeta(50.0).eval(2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        assert!(Activation::SoftplusBeta(1.0).eval(f64::NAN).is_err());
        assert!(Activation::SoftplusBeta(-1.0).eval(0.0).is_err());
    }

    #[test]
    fn softplus_strictly_convex_and_increasing() {
        for &beta in &[0.5f64, 1.0, 5.0, 50.0] {
            let h = 0.25;
            let mut x = -10.0f64;
            while x <= 10.0 {
                let first = softplus_beta(beta, x + h) - softplus_beta(beta, x);
                let second =
                    softplus_beta(beta, x + h) - 2.0 * softplus_beta(beta, x) + softplus_beta(beta, x - h);
                assert!(first > 0.0, "not increasing at β={beta}, x={x}");
                assert!(second >= 0.0, "second difference negative at β={beta}, x={x}");
                // away from saturation the curvature is resolvable in doubles
                if beta * x.abs() < 20.0 {
                    assert!(second > 0.0, "second difference not positive at β={beta}, x={x}");
                }
                x += h;
            }
        }
    }

    #[test]
    fn gap_examples() {
        let g = softplus_relu_gap(1.0, 0.0, 0.1).unwrap();
        assert!(g > 0.0 && g < 0.1 + 2f64.ln());

        let g = softplus_relu_gap(100.0, 10.0, 1e-6).unwrap();
        assert!(g > 0.0 && g < 1e-6 + 2f64.ln() / 100.0);

        let g = softplus_relu_gap(2.0, -5.0, 0.5).unwrap();
        let direct = softplus_beta(2.0, -4.5);
        assert!((g - direct).abs() < 1e-18);
    }

    #[test]
    fn gap_bound_on_grid() {
        // exact positivity is certified by the exponent once βx drops below
        // the representable range of doubles
        for &beta in &[0.5, 1.0, 10.0, 100.0] {
            for &delta in &[1e-6, 1e-3, 1.0, 10.0] {
                let mut x = -20.0;
                while x <= 20.0 {
                    let g = softplus_relu_gap(beta, x, delta).unwrap();
                    let upper = delta + 2f64.ln() / beta;
                    assert!(g < upper, "upper bound violated β={beta} Δ={delta} x={x}");
                    if g == 0.0 {
                        assert!(
                            beta * (x + delta) < -700.0,
                            "zero gap outside the underflow regime β={beta} Δ={delta} x={x}"
                        );
                    } else {
                        assert!(g > 0.0);
                    }
                    x += 0.5;
                }
            }
        }
    }

    #[test]
    fn forward_single_layer_is_activation() {
        let p = ScnnParams::from_raw(
            1,
            vec![array![[1.0]]],
            vec![],
            vec![array![0.0]],
            0.0, // β = 1
        )
        .unwrap();
        let (v, _) = p.forward(&array![0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_independent_recursion() {
        let mut r = rng(7);
        for _ in 0..20 {
            let p = ScnnParams::new(4, &[5, 6], &mut r);
            let z = rand_vec(4, -2.0, 2.0, &mut r);
            let (v, _) = p.forward(&z).unwrap();
            let v2 = naive_forward(&p, &z);
            assert!((v - v2).abs() <= 1e-14 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn forward_two_layer_hand_value() {
        // zero biases, zero input: o1 = σ(0)·1, value = σ(Σ_j w_j σ(0))
        let mut r = rng(3);
        let p = ScnnParams::new(2, &[3], &mut r);
        let beta = p.beta();
        let (v, _) = p.forward(&array![0.0, 0.0]).unwrap();
        let s0 = softplus_beta(beta, 0.0);
        let wh = &p.hidden_weights()[0];
        let acc: f64 = (0..3).map(|j| wh[[0, j]] * s0).sum();
        let expect = softplus_beta(beta, acc);
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn forward_shape_error() {
        let mut r = rng(1);
        let p = ScnnParams::new(3, &[4], &mut r);
        assert!(matches!(
            p.forward(&array![1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn forward_deterministic_bitwise() {
        let mut r = rng(11);
        let p = ScnnParams::new(3, &[8, 8], &mut r);
        let z = array![0.3, -1.2, 2.2];
        let (a, _) = p.forward(&z).unwrap();
        let (b, _) = p.forward(&z).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gradient_single_layer_closed_form() {
        let w = 0.7;
        let beta: f64 = 2.0;
        let p = ScnnParams::from_raw(1, vec![array![[w]]], vec![], vec![array![0.0]], beta.ln())
            .unwrap();
        for &z in &[-1.5, 0.0, 0.4, 3.0] {
            let (_, rec) = p.forward(&array![z]).unwrap();
            let g = p.input_gradient(&rec);
            let expect = w * sigmoid(beta * w * z);
            assert!((g[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(21);
        let h = 1e-5;
        for _ in 0..30 {
            let m = r.random_range(2..5);
            let p = ScnnParams::new(m, &[6, 5], &mut r);
            let z = rand_vec(m, -1.5, 1.5, &mut r);
            let (_, rec) = p.forward(&z).unwrap();
            let g = p.input_gradient(&rec);
            let mut fd = Array1::<f64>::zeros(m);
            for i in 0..m {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                fd[i] = (p.forward(&zp).unwrap().0 - p.forward(&zm).unwrap().0) / (2.0 * h);
            }
            let num = (&g - &fd).mapv(f64::abs).sum();
            let den = fd.mapv(f64::abs).sum().max(1e-12);
            assert!(num / den < 1e-6, "rel err {}", num / den);
        }
    }

    #[test]
    fn gradient_is_strictly_monotone() {
        let mut r = rng(33);
        let p = ScnnParams::new(3, &[10, 10], &mut r);
        for _ in 0..200 {
            let a = rand_vec(3, -3.0, 3.0, &mut r);
            let b = rand_vec(3, -3.0, 3.0, &mut r);
            let diff = &a - &b;
            let nd = diff.dot(&diff).sqrt();
            if nd < 1e-6 {
                continue;
            }
            let ga = p.value_and_grad(&a).unwrap().1;
            let gb = p.value_and_grad(&b).unwrap().1;
            let inner = (&ga - &gb).dot(&diff);
            assert!(inner > 0.0, "monotonicity violated: {inner}");
        }
    }

    #[test]
    fn strict_convexity_interpolation() {
        let mut r = rng(5);
        let p = ScnnParams::new(2, &[8], &mut r);
        for _ in 0..300 {
            let z1 = rand_vec(2, -2.0, 2.0, &mut r);
            let z2 = rand_vec(2, -2.0, 2.0, &mut r);
            if (&z1 - &z2).mapv(f64::abs).sum() < 1e-8 {
                continue;
            }
            let lam: f64 = r.random_range(0.05..0.95);
            let mid = &z1 * lam + &z2 * (1.0 - lam);
            let gm = p.forward(&mid).unwrap().0;
            let g1 = p.forward(&z1).unwrap().0;
            let g2 = p.forward(&z2).unwrap().0;
            assert!(gm < lam * g1 + (1.0 - lam) * g2 + 1e-12);
        }
    }

    fn param_fd_probe(
        p: &ScnnParams,
        z: &Array1<f64>,
        value_seed: f64,
        grad_seed: Option<&Array1<f64>>,
        h: f64,
    ) -> Vec<f64> {
        let mut flat = Vec::new();
        p.push_params(&mut flat);
        let phi = |params: &[f64]| -> f64 {
            let mut q = p.clone();
            q.read_params(&mut params.iter().copied()).unwrap();
            let (v, rec) = q.forward(z).unwrap();
            let mut out = value_seed * v;
            if let Some(c) = grad_seed {
                out += q.input_gradient(&rec).dot(c);
            }
            out
        };
        (0..flat.len())
            .map(|i| {
                let mut fp = flat.clone();
                let mut fm = flat.clone();
                fp[i] += h;
                fm[i] -= h;
                (phi(&fp) - phi(&fm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn param_gradient_value_path_matches_fd() {
        let mut r = rng(42);
        let p = ScnnParams::new(3, &[5, 4], &mut r);
        let z = rand_vec(3, -1.0, 1.0, &mut r);
        let (_, rec) = p.forward(&z).unwrap();
        let (_, grad) = p.vjp(&rec, 1.0, None).unwrap();
        let mut flat = Vec::new();
        grad.push_flat(&mut flat);
        let fd = param_fd_probe(&p, &z, 1.0, None, 1e-5);
        for (a, b) in flat.iter().zip(fd.iter()) {
            assert!(
                (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1.0),
                "param grad mismatch {a} vs {b}"
            );
        }
    }

    #[test]
    fn param_gradient_grad_path_matches_fd() {
        let mut r = rng(43);
        let p = ScnnParams::new(3, &[5, 4], &mut r);
        let z = rand_vec(3, -1.0, 1.0, &mut r);
        let c = rand_vec(3, -1.0, 1.0, &mut r);
        let (_, rec) = p.forward(&z).unwrap();
        let (_, grad) = p.vjp(&rec, 0.0, Some(&c)).unwrap();
        let mut flat = Vec::new();
        grad.push_flat(&mut flat);
        let fd = param_fd_probe(&p, &z, 0.0, Some(&c), 1e-5);
        for (a, b) in flat.iter().zip(fd.iter()) {
            assert!(
                (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1.0),
                "grad-of-grad mismatch {a} vs {b}"
            );
        }
    }

    #[test]
    fn input_adjoint_is_hessian_vector_product() {
        let mut r = rng(44);
        let p = ScnnParams::new(4, &[6, 6], &mut r);
        let z = rand_vec(4, -1.0, 1.0, &mut r);
        let c = rand_vec(4, -1.0, 1.0, &mut r);
        let (_, rec) = p.forward(&z).unwrap();
        let (dz, _) = p.vjp(&rec, 0.0, Some(&c)).unwrap();
        let h = 1e-5;
        let zp = &z + &(&c * h);
        let zm = &z - &(&c * h);
        let gp = p.value_and_grad(&zp).unwrap().1;
        let gm = p.value_and_grad(&zm).unwrap().1;
        let fd = (&gp - &gm) / (2.0 * h);
        let num = (&dz - &fd).mapv(f64::abs).sum();
        let den = fd.mapv(f64::abs).sum().max(1e-12);
        assert!(num / den < 1e-6, "HVP rel err {}", num / den);
    }

    #[test]
    fn zero_seed_gives_zero_grads() {
        let mut r = rng(45);
        let p = ScnnParams::new(2, &[4], &mut r);
        let z = array![0.4, -0.2];
        let (_, rec) = p.forward(&z).unwrap();
        let (dz, grad) = p.vjp(&rec, 0.0, None).unwrap();
        assert!(dz.iter().all(|v| *v == 0.0));
        let mut flat = Vec::new();
        grad.push_flat(&mut flat);
        assert!(flat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn param_roundtrip_bit_exact() {
        let mut r = rng(46);
        let p = ScnnParams::new(3, &[7, 5], &mut r);
        let mut flat = Vec::new();
        p.push_params(&mut flat);
        let mut q = p.clone();
        q.read_params(&mut flat.iter().copied()).unwrap();
        let mut flat2 = Vec::new();
        q.push_params(&mut flat2);
        assert_eq!(flat.len(), flat2.len());
        for (a, b) in flat.iter().zip(flat2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn quadratic_identity_and_diag() {
        let q = quadratic_convex(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let z = array![1.0, 2.0];
        assert!((q.value(&z).unwrap() - 2.5).abs() < 1e-15);
        let g = q.eval(&z).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[1] - 2.0).abs() < 1e-15);

        let q = quadratic_convex(&array![[2.0, 0.0], [0.0, 3.0]]).unwrap();
        let g = q.eval(&array![1.0, 1.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-15 && (g[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_rejects_non_pd() {
        assert!(quadratic_convex(&array![[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(quadratic_convex(&array![[0.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(quadratic_convex(&array![[1.0, 0.5], [0.4, 1.0]]).is_err());
    }

    #[test]
    fn quadratic_monotone_inner_product() {
        let mut r = rng(9);
        // random PD matrix: AAᵀ + I
        let a = Array2::from_shape_fn((3, 3), |_| r.random_range(-1.0..1.0));
        let mut k = a.dot(&a.t());
        for i in 0..3 {
            k[[i, i]] += 1.0;
        }
        let q = quadratic_convex(&k).unwrap();
        for _ in 0..50 {
            let x = rand_vec(3, -2.0, 2.0, &mut r);
            let y = rand_vec(3, -2.0, 2.0, &mut r);
            let d = &x - &y;
            let inner = (&q.eval(&x).unwrap() - &q.eval(&y).unwrap()).dot(&d);
            let expect = d.dot(&k.dot(&d));
            assert!((inner - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            if d.dot(&d) > 1e-12 {
                assert!(inner > 0.0);
            }
        }
    }

    #[test]
    fn quadratic_vjp_matches_fd() {
        let mut r = rng(10);
        let mut q = QuadraticConvex::scaled_identity(3, 0.8, 1e-6);
        // randomize the factor
        let mut flat = Vec::new();
        q.push_params(&mut flat);
        for v in flat.iter_mut() {
            *v += r.random_range(-0.3..0.3);
        }
        q.read_params(&mut flat.iter().copied()).unwrap();
        let z = rand_vec(3, -1.0, 1.0, &mut r);
        let c = rand_vec(3, -1.0, 1.0, &mut r);
        let (dz, grad) = q.vjp(&z, 0.7, Some(&c)).unwrap();
        let h = 1e-6;
        // params
        let phi = |params: &[f64]| {
            let mut qq = q.clone();
            qq.read_params(&mut params.iter().copied()).unwrap();
            0.7 * qq.value(&z).unwrap() + qq.eval(&z).unwrap().dot(&c)
        };
        let mut base = Vec::new();
        q.push_params(&mut base);
        for i in 0..base.len() {
            let mut fp = base.clone();
            let mut fm = base.clone();
            fp[i] += h;
            fm[i] -= h;
            let fd = (phi(&fp) - phi(&fm)) / (2.0 * h);
            let a = grad.factor.as_slice().unwrap()[i];
            assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1.0));
        }
        // input
        for i in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let f = |zz: &Array1<f64>| 0.7 * q.value(zz).unwrap() + q.eval(zz).unwrap().dot(&c);
            let fd = (f(&zp) - f(&zm)) / (2.0 * h);
            assert!((dz[i] - fd).abs() <= 1e-6 * dz[i].abs().max(fd.abs()).max(1.0));
        }
    }

    #[test]
    fn dense_vjp_matches_fd() {
        let mut r = rng(12);
        let net = DenseNet::new(3, &[5, 4], 3, &mut r);
        let z = rand_vec(3, -1.0, 1.0, &mut r);
        let c = rand_vec(3, -1.0, 1.0, &mut r);
        let (_, rec) = net.forward(&z).unwrap();
        let (dz, grad) = net.vjp(&rec, &c).unwrap();
        let h = 1e-5;
        let phi = |nn: &DenseNet, zz: &Array1<f64>| nn.forward(zz).unwrap().0.dot(&c);
        // input path
        for i in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let fd = (phi(&net, &zp) - phi(&net, &zm)) / (2.0 * h);
            assert!((dz[i] - fd).abs() <= 1e-6 * dz[i].abs().max(fd.abs()).max(1.0));
        }
        // parameter path
        let mut base = Vec::new();
        net.push_params(&mut base);
        let mut gflat = Vec::new();
        grad.push_flat(&mut gflat);
        for i in (0..base.len()).step_by(7) {
            let mut fp = base.clone();
            let mut fm = base.clone();
            fp[i] += h;
            fm[i] -= h;
            let mut np = net.clone();
            np.read_params(&mut fp.iter().copied()).unwrap();
            let mut nm = net.clone();
            nm.read_params(&mut fm.iter().copied()).unwrap();
            let fd = (phi(&np, &z) - phi(&nm, &z)) / (2.0 * h);
            assert!(
                (gflat[i] - fd).abs() <= 1e-5 * gflat[i].abs().max(fd.abs()).max(1.0),
                "dense param grad {i}: {} vs {}",
                gflat[i],
                fd
            );
        }
    }

    #[test]
    fn universal_approximation_desk_scale() {
        // fit q(z) = z² on [−1, 1] with a 3-layer, 20-neuron network
        let mut r = rng(2024);
        let mut p = ScnnParams::new(1, &[20, 20], &mut r);
        let grid: Vec<f64> = (0..81).map(|i| -1.0 + i as f64 * 0.025).collect();

        let n_params = p.param_count();
        let (mut m1, mut m2) = (vec![0.0; n_params], vec![0.0; n_params]);
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let lr = 0.02;
        for step in 1..=1500 {
            let mut grad_acc = ScnnGrad::zeros_like(&p);
            for &x in &grid {
                let z = array![x];
                let (v, rec) = p.forward(&z).unwrap();
                let seed = 2.0 * (v - x * x) / grid.len() as f64;
                let (_, g) = p.vjp(&rec, seed, None).unwrap();
                grad_acc.scaled_add(&g, 1.0);
            }
            let mut gflat = Vec::new();
            grad_acc.push_flat(&mut gflat);
            let mut pflat = Vec::new();
            p.push_params(&mut pflat);
            let bc1 = 1.0 - b1.powi(step);
            let bc2 = 1.0 - b2.powi(step);
            for i in 0..n_params {
                m1[i] = b1 * m1[i] + (1.0 - b1) * gflat[i];
                m2[i] = b2 * m2[i] + (1.0 - b2) * gflat[i] * gflat[i];
                pflat[i] -= lr * (m1[i] / bc1) / ((m2[i] / bc2).sqrt() + eps);
            }
            p.read_params(&mut pflat.iter().copied()).unwrap();
        }
        let sup = grid
            .iter()
            .map(|&x| (p.forward(&array![x]).unwrap().0 - x * x).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.05, "sup error {sup}");
    }
}
