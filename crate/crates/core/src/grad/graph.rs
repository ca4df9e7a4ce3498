use rand::Rng;

use super::tensor::Tensor;
use crate::numerics::{
    digamma_unchecked, gamma_reparam_gradient, ln_gamma_unchecked, sample_gamma, sigmoid, softplus,
    trigamma_unchecked, GammaParams,
};
use crate::{Error, Result};

/// Smallest Gamma draw handed to downstream nodes; keeps logarithms finite.
pub const MIN_GAMMA_SAMPLE: f64 = 1e-200;

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    grad: Option<Tensor>,
}

/// Named trainable arrays and their gradient accumulators.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param { name: name.into(), value, grad: None });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor> {
        self.params[id.0].grad.as_ref()
    }

    /// Clears every gradient accumulator.
    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    fn accumulate(&mut self, id: ParamId, g: &Tensor) {
        let slot = &mut self.params[id.0].grad;
        match slot {
            Some(acc) => acc.add_assign(g),
            None => *slot = Some(g.clone()),
        }
    }

    /// Parameter values only, in insertion order.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Shape(format!("snapshot has {} arrays, store has {}", values.len(), self.params.len())));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::Shape(format!("snapshot shape mismatch for {}", p.name)));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    pub fn named_values(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }
}

/// Source of Gamma variates for [`Graph::gamma_sample`].
pub trait GammaDraw {
    fn draw(&mut self, params: GammaParams) -> Result<f64>;
}

/// Draws by Marsaglia–Tsang from a random stream.
pub struct RngDraw<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> GammaDraw for RngDraw<'_, R> {
    fn draw(&mut self, params: GammaParams) -> Result<f64> {
        Ok(sample_gamma(params, self.0))
    }
}

/// Draws by inverting the CDF at a fixed sequence of uniforms, making the
/// sample a smooth function of the parameters (common random numbers).
pub struct QuantileDraw<'a> {
    uniforms: &'a [f64],
    next: usize,
}

impl<'a> QuantileDraw<'a> {
    pub fn new(uniforms: &'a [f64]) -> Self {
        Self { uniforms, next: 0 }
    }
}

impl GammaDraw for QuantileDraw<'_> {
    fn draw(&mut self, params: GammaParams) -> Result<f64> {
        let u = *self
            .uniforms
            .get(self.next)
            .ok_or_else(|| Error::Contract("fixed uniform draws exhausted".into()))?;
        self.next += 1;
        params.quantile(u)
    }
}

/// Reference to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Affine { input: Value, weights: Value, bias: Value },
    Relu(Value),
    Softplus(Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Div(Value, Value),
    Scale(Value, f64),
    Offset(Value),
    Ln(Value),
    Exp(Value),
    LnGamma(Value),
    Digamma(Value),
    LogSumExp(Value, Value),
    Column(Value, usize),
    Concat(Vec<Value>),
    RepeatRows(Value, usize),
    Sum(Value),
    Mean(Value),
    GammaSample { shape: Value, rate: Value, d_shape: Vec<f64>, d_rate: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape. Node order is a topological order, so the
/// backward pass is a single reverse sweep.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    visits: usize,
    track: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), visits: 0, track: true }
    }

    /// A tape whose parameters are treated as constants: forward values are
    /// identical, nothing is differentiable.
    pub fn inference() -> Self {
        Self { nodes: Vec::new(), visits: 0, track: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes processed by the most recent [`Graph::backward`].
    pub fn last_backward_visits(&self) -> usize {
        self.visits
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Value) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Value {
        self.nodes.push(Node { value, op, requires_grad });
        Value(self.nodes.len() - 1)
    }

    fn needs(&self, v: Value) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn same_shape(&self, a: Value, b: Value, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape(format!("{what}: {}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1)));
        }
        Ok(())
    }

    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Constant, false)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Value {
        let track = self.track;
        self.push(store.value(id).clone(), Op::Param(id), track)
    }

    /// `input · weights + bias` with the bias broadcast over rows.
    pub fn affine(&mut self, input: Value, weights: Value, bias: Value) -> Result<Value> {
        let mut out = self.value(input).matmul(self.value(weights))?;
        out.add_row_broadcast(self.value(bias))?;
        let rg = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(out, Op::Affine { input, weights, bias }, rg))
    }

    pub fn relu(&mut self, x: Value) -> Value {
        let out = self.value(x).map(|v| v.max(0.0));
        let rg = self.needs(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn softplus(&mut self, x: Value) -> Value {
        let out = self.value(x).map(softplus);
        let rg = self.needs(x);
        self.push(out, Op::Softplus(x), rg)
    }

    fn binary(&mut self, a: Value, b: Value, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Value> {
        self.same_shape(a, b, what)?;
        let out = self.value(a).zip_map(self.value(b), f);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    pub fn log_sum_exp(&mut self, a: Value, b: Value) -> Result<Value> {
        self.binary(a, b, "log_sum_exp", crate::numerics::log_sum_exp, Op::LogSumExp(a, b))
    }

    pub fn scale(&mut self, x: Value, c: f64) -> Value {
        let out = self.value(x).map(|v| v * c);
        let rg = self.needs(x);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn offset(&mut self, x: Value, c: f64) -> Value {
        let out = self.value(x).map(|v| v + c);
        let rg = self.needs(x);
        self.push(out, Op::Offset(x), rg)
    }

    fn unary(&mut self, x: Value, f: impl Fn(f64) -> f64, op: Op) -> Value {
        let out = self.value(x).map(f);
        let rg = self.needs(x);
        self.push(out, op, rg)
    }

    pub fn ln(&mut self, x: Value) -> Value {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    pub fn exp(&mut self, x: Value) -> Value {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    /// Elementwise ln Γ; entries must be positive.
    pub fn ln_gamma(&mut self, x: Value) -> Result<Value> {
        if self.value(x).data().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("ln_gamma node requires positive entries".into()));
        }
        Ok(self.unary(x, ln_gamma_unchecked, Op::LnGamma(x)))
    }

    /// Elementwise digamma; entries must be positive.
    pub fn digamma(&mut self, x: Value) -> Result<Value> {
        if self.value(x).data().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("digamma node requires positive entries".into()));
        }
        Ok(self.unary(x, digamma_unchecked, Op::Digamma(x)))
    }

    pub fn column(&mut self, x: Value, c: usize) -> Result<Value> {
        if c >= self.value(x).cols() {
            return Err(Error::Shape(format!("column {c} out of range")));
        }
        let out = self.value(x).select_column(c);
        let rg = self.needs(x);
        Ok(self.push(out, Op::Column(x, c), rg))
    }

    pub fn concat_columns(&mut self, parts: &[Value]) -> Result<Value> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_columns(&tensors)?;
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    pub fn repeat_rows(&mut self, x: Value, times: usize) -> Value {
        let out = self.value(x).repeat_rows(times);
        let rg = self.needs(x);
        self.push(out, Op::RepeatRows(x, times), rg)
    }

    pub fn sum(&mut self, x: Value) -> Value {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.needs(x);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Value) -> Value {
        let n = self.value(x).len() as f64;
        let out = Tensor::scalar(self.value(x).sum() / n);
        let rg = self.needs(x);
        self.push(out, Op::Mean(x), rg)
    }

    /// Elementwise Gamma(shape, rate) draws whose backward pass uses the
    /// implicit reparameterization gradients.
    pub fn gamma_sample(&mut self, shape: Value, rate: Value, source: &mut dyn GammaDraw) -> Result<Value> {
        self.same_shape(shape, rate, "gamma_sample")?;
        let rg = self.needs(shape) || self.needs(rate);
        let n = self.value(shape).len();
        let mut z = Vec::with_capacity(n);
        let mut d_shape = Vec::with_capacity(if rg { n } else { 0 });
        let mut d_rate = Vec::with_capacity(if rg { n } else { 0 });
        for i in 0..n {
            let params = GammaParams::new(self.value(shape).data()[i], self.value(rate).data()[i])?;
            let zi = source.draw(params)?.max(MIN_GAMMA_SAMPLE);
            if rg {
                let (ds, dr) = gamma_reparam_gradient(params, zi)?;
                d_shape.push(ds);
                d_rate.push(dr);
            }
            z.push(zi);
        }
        let (rows, cols) = self.value(shape).shape();
        let out = Tensor::new(rows, cols, z)?;
        Ok(self.push(out, Op::GammaSample { shape, rate, d_shape, d_rate }, rg))
    }

    /// Reverse sweep from the scalar `loss`; parameter gradients accumulate
    /// into `store`.
    pub fn backward(&mut self, loss: Value, store: &mut ParamStore) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        self.visits = 0;

        fn acc(grads: &mut [Option<Tensor>], nodes: &[Node], v: Value, g: Tensor) {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.visits += 1;
            let nodes = &self.nodes;
            let out = &nodes[i].value;
            match &nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => store.accumulate(*id, &g),
                Op::Affine { input, weights, bias } => {
                    if nodes[input.0].requires_grad {
                        acc(&mut grads, nodes, *input, g.matmul_t(&nodes[weights.0].value)?);
                    }
                    if nodes[weights.0].requires_grad {
                        acc(&mut grads, nodes, *weights, nodes[input.0].value.t_matmul(&g)?);
                    }
                    acc(&mut grads, nodes, *bias, g.column_sums());
                }
                Op::Relu(x) => {
                    let gx = g.zip_map(&nodes[x.0].value, |gi, xi| if xi > 0.0 { gi } else { 0.0 });
                    acc(&mut grads, nodes, *x, gx);
                }
                Op::Softplus(x) => {
                    let gx = g.zip_map(&nodes[x.0].value, |gi, xi| gi * sigmoid(xi));
                    acc(&mut grads, nodes, *x, gx);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, nodes, *a, g.clone());
                    acc(&mut grads, nodes, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, nodes, *a, g.clone());
                    acc(&mut grads, nodes, *b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, nodes, *a, g.zip_map(&nodes[b.0].value, |gi, bi| gi * bi));
                    acc(&mut grads, nodes, *b, g.zip_map(&nodes[a.0].value, |gi, ai| gi * ai));
                }
                Op::Div(a, b) => {
                    let bv = &nodes[b.0].value;
                    acc(&mut grads, nodes, *a, g.zip_map(bv, |gi, bi| gi / bi));
                    // d(a/b)/db = -(a/b)/b
                    let gb = g.zip_map(out, |gi, qi| gi * qi).zip_map(bv, |t, bi| -t / bi);
                    acc(&mut grads, nodes, *b, gb);
                }
                Op::Scale(x, c) => {
                    let c = *c;
                    acc(&mut grads, nodes, *x, g.map(|v| v * c));
                }
                Op::Offset(x) => acc(&mut grads, nodes, *x, g),
                Op::Ln(x) => acc(&mut grads, nodes, *x, g.zip_map(&nodes[x.0].value, |gi, xi| gi / xi)),
                Op::Exp(x) => acc(&mut grads, nodes, *x, g.zip_map(out, |gi, oi| gi * oi)),
                Op::LnGamma(x) => {
                    acc(&mut grads, nodes, *x, g.zip_map(&nodes[x.0].value, |gi, xi| gi * digamma_unchecked(xi)))
                }
                Op::Digamma(x) => {
                    acc(&mut grads, nodes, *x, g.zip_map(&nodes[x.0].value, |gi, xi| gi * trigamma_unchecked(xi)))
                }
                Op::LogSumExp(a, b) => {
                    let ga = g.zip_map(&nodes[a.0].value.zip_map(out, |ai, oi| (ai - oi).exp()), |gi, w| gi * w);
                    let gb = g.zip_map(&nodes[b.0].value.zip_map(out, |bi, oi| (bi - oi).exp()), |gi, w| gi * w);
                    acc(&mut grads, nodes, *a, ga);
                    acc(&mut grads, nodes, *b, gb);
                }
                Op::Column(x, c) => {
                    let (rows, cols) = nodes[x.0].value.shape();
                    let mut gx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        gx.set(r, *c, g.data()[r]);
                    }
                    acc(&mut grads, nodes, *x, gx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (rows, cols) = nodes[p.0].value.shape();
                        let mut gp = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                gp.set(r, c, g.get(r, offset + c));
                            }
                        }
                        offset += cols;
                        acc(&mut grads, nodes, *p, gp);
                    }
                }
                Op::RepeatRows(x, times) => {
                    let (rows, cols) = nodes[x.0].value.shape();
                    let mut gx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for k in 0..*times {
                            for c in 0..cols {
                                let v = gx.get(r, c) + g.get(r * times + k, c);
                                gx.set(r, c, v);
                            }
                        }
                    }
                    acc(&mut grads, nodes, *x, gx);
                }
                Op::Sum(x) => {
                    let (rows, cols) = nodes[x.0].value.shape();
                    acc(&mut grads, nodes, *x, Tensor::filled(rows, cols, g.data()[0]));
                }
                Op::Mean(x) => {
                    let (rows, cols) = nodes[x.0].value.shape();
                    let n = (rows * cols) as f64;
                    acc(&mut grads, nodes, *x, Tensor::filled(rows, cols, g.data()[0] / n));
                }
                Op::GammaSample { shape, rate, d_shape, d_rate } => {
                    let (rows, cols) = g.shape();
                    let gs = g.data().iter().zip(d_shape).map(|(gi, d)| gi * d).collect();
                    let gr = g.data().iter().zip(d_rate).map(|(gi, d)| gi * d).collect();
                    acc(&mut grads, nodes, *shape, Tensor::new(rows, cols, gs)?);
                    acc(&mut grads, nodes, *rate, Tensor::new(rows, cols, gr)?);
                }
            }
        }
        Ok(())
    }
}
