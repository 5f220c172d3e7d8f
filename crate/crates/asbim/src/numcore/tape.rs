//! Reverse-mode gradient tape over vector/matrix primitives.
//!
//! The tape records each primitive as a node holding its operands and its
//! forward value. Nodes are appended in evaluation order, so a single
//! reverse sweep visits them in valid topological order and accumulates
//! exact partial derivatives of one scalar output with respect to every
//! leaf. Forward values are produced by the same kernels as the plain
//! functions in [`crate::numcore`], so a value read off the tape is
//! bitwise identical to the untaped computation.
//!
//! A tape instance is single-threaded and never shared; independent
//! computations build independent tapes.

use crate::error::{Error, Result};
use crate::numcore::{dense_forward, relu, sigmoid, Matrix, Vector};

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Value stored at a node. Matrices only occur as leaves (weights,
/// embedding tables); interior nodes are scalars or vectors.
#[derive(Debug, Clone)]
pub enum Value {
    Scalar(f64),
    Vector(Vector),
    Matrix(Matrix),
}

impl Value {
    fn zeros_like(&self) -> Value {
        match self {
            Value::Scalar(_) => Value::Scalar(0.0),
            Value::Vector(v) => Value::Vector(Vector::zeros(v.dim())),
            Value::Matrix(m) => Value::Matrix(Matrix::zeros(m.rows(), m.cols())),
        }
    }
}

enum Op {
    Leaf,
    /// W x + b -> vector
    Dense { x: NodeId, w: NodeId, b: NodeId },
    /// max(0, x) elementwise -> vector
    Relu { x: NodeId },
    /// c * x for constant c -> vector
    ScaleConst { x: NodeId, c: f64 },
    /// s * x for scalar node s -> vector
    MulScalarVec { s: NodeId, x: NodeId },
    /// a + b -> vector
    AddVec { a: NodeId, b: NodeId },
    /// elementwise mean of xs -> vector
    MeanVecs { xs: Vec<NodeId> },
    /// row of a matrix leaf -> vector
    RowLookup { table: NodeId, row: usize },
    /// scalars stacked into a vector
    Stack { xs: Vec<NodeId> },
    /// softmax with max-subtraction -> vector
    Softmax { x: NodeId },
    /// <a, b> -> scalar
    Dot { a: NodeId, b: NodeId },
    /// x[i] -> scalar
    Index { x: NodeId, i: usize },
    /// logistic(x) -> scalar
    Sigmoid { x: NodeId },
    /// a*x + b for constants a, b -> scalar (b folds into the value)
    AffineConst { x: NodeId, a: f64 },
    /// a + b -> scalar
    AddScalar { a: NodeId, b: NodeId },
    /// x^2 -> scalar
    Square { x: NodeId },
    /// sum of squared elements of a leaf of any shape -> scalar
    SumSquares { x: NodeId },
}

struct Node {
    op: Op,
    value: Value,
}

/// Recording tape. Build the computation through the methods below, then
/// call [`Tape::backward`] on the scalar output.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Value) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    pub fn leaf_scalar(&mut self, v: f64) -> NodeId {
        self.push(Op::Leaf, Value::Scalar(v))
    }

    pub fn leaf_vector(&mut self, v: Vector) -> NodeId {
        self.push(Op::Leaf, Value::Vector(v))
    }

    pub fn leaf_matrix(&mut self, m: Matrix) -> NodeId {
        self.push(Op::Leaf, Value::Matrix(m))
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        match &self.nodes[id.0].value {
            Value::Scalar(s) => *s,
            _ => panic!("node {} is not a scalar", id.0),
        }
    }

    pub fn vector_value(&self, id: NodeId) -> &Vector {
        match &self.nodes[id.0].value {
            Value::Vector(v) => v,
            _ => panic!("node {} is not a vector", id.0),
        }
    }

    fn matrix_value(&self, id: NodeId) -> &Matrix {
        match &self.nodes[id.0].value {
            Value::Matrix(m) => m,
            _ => panic!("node {} is not a matrix", id.0),
        }
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let out = dense_forward(self.vector_value(x), self.matrix_value(w), self.vector_value(b))?;
        Ok(self.push(Op::Dense { x, w, b }, Value::Vector(out)))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = relu(self.vector_value(x));
        self.push(Op::Relu { x }, Value::Vector(out))
    }

    pub fn scale_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = Vector::zeros(self.vector_value(x).dim());
        let mut out = out;
        for (o, v) in out.as_mut_slice().iter_mut().zip(self.vector_value(x).iter()) {
            *o = c * v;
        }
        self.push(Op::ScaleConst { x, c }, Value::Vector(out))
    }

    pub fn mul_scalar_vec(&mut self, s: NodeId, x: NodeId) -> NodeId {
        let sv = self.scalar_value(s);
        let mut out = self.vector_value(x).clone();
        for o in out.as_mut_slice() {
            *o *= sv;
        }
        self.push(Op::MulScalarVec { s, x }, Value::Vector(out))
    }

    pub fn add_vec(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.vector_value(a);
        let bv = self.vector_value(b);
        debug_assert_eq!(av.dim(), bv.dim());
        let mut out = av.clone();
        for (o, v) in out.as_mut_slice().iter_mut().zip(bv.iter()) {
            *o += v;
        }
        self.push(Op::AddVec { a, b }, Value::Vector(out))
    }

    pub fn mean_vecs(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::Config("mean over zero vectors".into()));
        }
        let dim = self.vector_value(xs[0]).dim();
        let mut out = Vector::zeros(dim);
        for &x in xs {
            let xv = self.vector_value(x);
            if xv.dim() != dim {
                return Err(Error::Config("mean over vectors of unequal dims".into()));
            }
            for (o, v) in out.as_mut_slice().iter_mut().zip(xv.iter()) {
                *o += v;
            }
        }
        let k = xs.len() as f64;
        for o in out.as_mut_slice() {
            *o /= k;
        }
        Ok(self.push(Op::MeanVecs { xs: xs.to_vec() }, Value::Vector(out)))
    }

    pub fn row_lookup(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let m = self.matrix_value(table);
        if row >= m.rows() {
            return Err(Error::Config(format!(
                "embedding row {row} out of range for table with {} rows",
                m.rows()
            )));
        }
        let out = Vector::new(m.row(row).to_vec())?;
        Ok(self.push(Op::RowLookup { table, row }, Value::Vector(out)))
    }

    pub fn stack(&mut self, xs: &[NodeId]) -> NodeId {
        let vals: Vec<f64> = xs.iter().map(|&x| self.scalar_value(x)).collect();
        self.push(
            Op::Stack { xs: xs.to_vec() },
            Value::Vector(Vector::new(vals).expect("stacked scalars are finite")),
        )
    }

    /// Softmax over the full vector (callers stack only unmasked scores).
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.vector_value(x);
        let mask = vec![true; xv.dim()];
        let out = crate::numcore::masked_softmax(xv.as_slice(), &mask)?;
        Ok(self.push(Op::Softmax { x }, Value::Vector(Vector::new(out)?)))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.vector_value(a);
        let bv = self.vector_value(b);
        debug_assert_eq!(av.dim(), bv.dim());
        let mut acc = 0.0;
        for (x, y) in av.iter().zip(bv.iter()) {
            acc += x * y;
        }
        self.push(Op::Dot { a, b }, Value::Scalar(acc))
    }

    pub fn index(&mut self, x: NodeId, i: usize) -> NodeId {
        let v = self.vector_value(x)[i];
        self.push(Op::Index { x, i }, Value::Scalar(v))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = sigmoid(self.scalar_value(x));
        self.push(Op::Sigmoid { x }, Value::Scalar(v))
    }

    pub fn affine_const(&mut self, x: NodeId, a: f64, b: f64) -> NodeId {
        let v = a * self.scalar_value(x) + b;
        self.push(Op::AffineConst { x, a }, Value::Scalar(v))
    }

    pub fn add_scalar(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.scalar_value(a) + self.scalar_value(b);
        self.push(Op::AddScalar { a, b }, Value::Scalar(v))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let v = self.scalar_value(x);
        self.push(Op::Square { x }, Value::Scalar(v * v))
    }

    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let v = match &self.nodes[x.0].value {
            Value::Scalar(s) => s * s,
            Value::Vector(v) => v.iter().map(|e| e * e).sum(),
            Value::Matrix(m) => m.as_slice().iter().map(|e| e * e).sum(),
        };
        self.push(Op::SumSquares { x }, Value::Scalar(v))
    }

    /// Reverse sweep from a scalar output. Returns the full gradient set;
    /// query it with the leaf ids registered on this tape.
    pub fn backward(&self, output: NodeId) -> Result<GradientSet> {
        match &self.nodes[output.0].value {
            Value::Scalar(s) => {
                if !s.is_finite() {
                    return Err(Error::Numerical(
                        "backward from non-finite scalar output".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::Internal(
                    "backward requires a scalar output node".into(),
                ))
            }
        }

        let mut grads: Vec<Value> = self.nodes.iter().map(|n| n.value.zeros_like()).collect();
        set_scalar(&mut grads[output.0], 1.0);

        for idx in (0..=output.0).rev() {
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Dense { x, w, b } => {
                    let g = take_vector(&mut grads[idx]);
                    let xv = self.vector_value(*x).clone();
                    let wv = self.matrix_value(*w);
                    {
                        let gb = vector_mut(&mut grads[b.0]);
                        for (o, gi) in gb.as_mut_slice().iter_mut().zip(g.iter()) {
                            *o += gi;
                        }
                    }
                    {
                        let gw = matrix_mut(&mut grads[w.0]);
                        for r in 0..gw.rows() {
                            let gr = g[r];
                            let row = gw.row_mut(r);
                            for (c, o) in row.iter_mut().enumerate() {
                                *o += gr * xv[c];
                            }
                        }
                    }
                    {
                        let gx = vector_mut(&mut grads[x.0]);
                        for r in 0..wv.rows() {
                            let gr = g[r];
                            let row = wv.row(r);
                            for (c, wc) in row.iter().enumerate() {
                                gx[c] += gr * wc;
                            }
                        }
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::Relu { x } => {
                    let g = take_vector(&mut grads[idx]);
                    let out = self.vector_value(NodeId(idx));
                    let gx = vector_mut(&mut grads[x.0]);
                    for i in 0..g.dim() {
                        if out[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::ScaleConst { x, c } => {
                    let g = take_vector(&mut grads[idx]);
                    let gx = vector_mut(&mut grads[x.0]);
                    for i in 0..g.dim() {
                        gx[i] += c * g[i];
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::MulScalarVec { s, x } => {
                    let g = take_vector(&mut grads[idx]);
                    let sv = self.scalar_value(*s);
                    let xv = self.vector_value(*x).clone();
                    {
                        let gx = vector_mut(&mut grads[x.0]);
                        for i in 0..g.dim() {
                            gx[i] += sv * g[i];
                        }
                    }
                    {
                        let mut acc = 0.0;
                        for i in 0..g.dim() {
                            acc += g[i] * xv[i];
                        }
                        add_scalar_grad(&mut grads[s.0], acc);
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::AddVec { a, b } => {
                    let g = take_vector(&mut grads[idx]);
                    for &p in &[*a, *b] {
                        let gp = vector_mut(&mut grads[p.0]);
                        for i in 0..g.dim() {
                            gp[i] += g[i];
                        }
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::MeanVecs { xs } => {
                    let g = take_vector(&mut grads[idx]);
                    let k = xs.len() as f64;
                    for &x in xs {
                        let gx = vector_mut(&mut grads[x.0]);
                        for i in 0..g.dim() {
                            gx[i] += g[i] / k;
                        }
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::RowLookup { table, row } => {
                    let g = take_vector(&mut grads[idx]);
                    let gt = matrix_mut(&mut grads[table.0]);
                    let target = gt.row_mut(*row);
                    for (o, gi) in target.iter_mut().zip(g.iter()) {
                        *o += gi;
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::Stack { xs } => {
                    let g = take_vector(&mut grads[idx]);
                    for (j, &x) in xs.iter().enumerate() {
                        add_scalar_grad(&mut grads[x.0], g[j]);
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::Softmax { x } => {
                    // dL/dx_i = y_i (g_i - sum_j g_j y_j)
                    let g = take_vector(&mut grads[idx]);
                    let y = self.vector_value(NodeId(idx));
                    let mut inner = 0.0;
                    for i in 0..g.dim() {
                        inner += g[i] * y[i];
                    }
                    let gx = vector_mut(&mut grads[x.0]);
                    for i in 0..g.dim() {
                        gx[i] += y[i] * (g[i] - inner);
                    }
                    grads[idx] = Value::Vector(g);
                }
                Op::Dot { a, b } => {
                    let g = scalar_grad(&grads[idx]);
                    let av = self.vector_value(*a).clone();
                    let bv = self.vector_value(*b).clone();
                    {
                        let ga = vector_mut(&mut grads[a.0]);
                        for i in 0..bv.dim() {
                            ga[i] += g * bv[i];
                        }
                    }
                    {
                        let gb = vector_mut(&mut grads[b.0]);
                        for i in 0..av.dim() {
                            gb[i] += g * av[i];
                        }
                    }
                }
                Op::Index { x, i } => {
                    let g = scalar_grad(&grads[idx]);
                    let gx = vector_mut(&mut grads[x.0]);
                    gx[*i] += g;
                }
                Op::Sigmoid { x } => {
                    let g = scalar_grad(&grads[idx]);
                    let y = self.scalar_value(NodeId(idx));
                    add_scalar_grad(&mut grads[x.0], g * y * (1.0 - y));
                }
                Op::AffineConst { x, a } => {
                    let g = scalar_grad(&grads[idx]);
                    add_scalar_grad(&mut grads[x.0], a * g);
                }
                Op::AddScalar { a, b } => {
                    let g = scalar_grad(&grads[idx]);
                    add_scalar_grad(&mut grads[a.0], g);
                    add_scalar_grad(&mut grads[b.0], g);
                }
                Op::Square { x } => {
                    let g = scalar_grad(&grads[idx]);
                    let xv = self.scalar_value(*x);
                    add_scalar_grad(&mut grads[x.0], 2.0 * xv * g);
                }
                Op::SumSquares { x } => {
                    let g = scalar_grad(&grads[idx]);
                    match (&self.nodes[x.0].value, &mut grads[x.0]) {
                        (Value::Scalar(v), Value::Scalar(gx)) => *gx += 2.0 * v * g,
                        (Value::Vector(v), Value::Vector(gx)) => {
                            for (o, e) in gx.as_mut_slice().iter_mut().zip(v.iter()) {
                                *o += 2.0 * e * g;
                            }
                        }
                        (Value::Matrix(m), Value::Matrix(gx)) => {
                            for (o, e) in gx.as_mut_slice().iter_mut().zip(m.as_slice()) {
                                *o += 2.0 * e * g;
                            }
                        }
                        _ => return Err(Error::Internal("gradient shape mismatch".into())),
                    }
                }
            }
        }

        Ok(GradientSet { grads })
    }
}

fn set_scalar(v: &mut Value, x: f64) {
    match v {
        Value::Scalar(s) => *s = x,
        _ => panic!("expected scalar gradient slot"),
    }
}

fn scalar_grad(v: &Value) -> f64 {
    match v {
        Value::Scalar(s) => *s,
        _ => panic!("expected scalar gradient slot"),
    }
}

fn add_scalar_grad(v: &mut Value, x: f64) {
    match v {
        Value::Scalar(s) => *s += x,
        _ => panic!("expected scalar gradient slot"),
    }
}

fn vector_mut(v: &mut Value) -> &mut Vector {
    match v {
        Value::Vector(v) => v,
        _ => panic!("expected vector gradient slot"),
    }
}

fn matrix_mut(v: &mut Value) -> &mut Matrix {
    match v {
        Value::Matrix(m) => m,
        _ => panic!("expected matrix gradient slot"),
    }
}

// Temporarily move a vector gradient out of the arena so operand slots can
// be borrowed mutably; the caller puts it back.
fn take_vector(v: &mut Value) -> Vector {
    match std::mem::replace(v, Value::Scalar(0.0)) {
        Value::Vector(v) => v,
        _ => panic!("expected vector gradient slot"),
    }
}

/// Gradients of one scalar output with respect to every node on the tape.
pub struct GradientSet {
    grads: Vec<Value>,
}

impl GradientSet {
    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        match self.grads.get(id.0) {
            Some(Value::Scalar(s)) => Ok(*s),
            Some(_) => Err(Error::Internal(format!("node {} is not a scalar", id.0))),
            None => Err(Error::Internal(format!("node {} not on tape", id.0))),
        }
    }

    pub fn vector(&self, id: NodeId) -> Result<&Vector> {
        match self.grads.get(id.0) {
            Some(Value::Vector(v)) => Ok(v),
            Some(_) => Err(Error::Internal(format!("node {} is not a vector", id.0))),
            None => Err(Error::Internal(format!("node {} not on tape", id.0))),
        }
    }

    pub fn matrix(&self, id: NodeId) -> Result<&Matrix> {
        match self.grads.get(id.0) {
            Some(Value::Matrix(m)) => Ok(m),
            Some(_) => Err(Error::Internal(format!("node {} is not a matrix", id.0))),
            None => Err(Error::Internal(format!("node {} not on tape", id.0))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // loss = theta^2 at theta = 3 -> d/dtheta = 6
        let mut tape = Tape::new();
        let theta = tape.leaf_scalar(3.0);
        let loss = tape.square(theta);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.scalar(theta).unwrap(), 6.0);
    }

    #[test]
    fn dead_relu_gradient_is_zero() {
        // loss = sum(relu(theta_vec)) via dot with ones, at theta = -1
        let mut tape = Tape::new();
        let theta = tape.leaf_vector(Vector::new(vec![-1.0]).unwrap());
        let r = tape.relu(theta);
        let ones = tape.leaf_vector(Vector::new(vec![1.0]).unwrap());
        let loss = tape.dot(r, ones);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.vector(theta).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn dense_and_dot_chain() {
        // loss = <w2, relu(W x + b)>; check against hand derivation.
        let mut tape = Tape::new();
        let x = tape.leaf_vector(Vector::new(vec![1.0, -2.0]).unwrap());
        let w = tape.leaf_matrix(Matrix::new(2, 2, vec![1.0, 0.5, -0.25, 2.0]).unwrap());
        let b = tape.leaf_vector(Vector::new(vec![0.1, -0.2]).unwrap());
        let h = tape.dense(x, w, b).unwrap();
        // h = [1 - 1 + 0.1, -0.25 - 4 - 0.2] = [0.1, -4.45]; relu -> [0.1, 0]
        let r = tape.relu(h);
        let w2 = tape.leaf_vector(Vector::new(vec![3.0, 7.0]).unwrap());
        let loss = tape.dot(r, w2);
        assert!((tape.scalar_value(loss) - 0.3).abs() < 1e-15);

        let grads = tape.backward(loss).unwrap();
        // Only the first output unit is active; dL/dW row0 = 3 * x, row1 = 0.
        let gw = grads.matrix(w).unwrap();
        assert_eq!(gw.row(0), &[3.0, -6.0]);
        assert_eq!(gw.row(1), &[0.0, 0.0]);
        let gb = grads.vector(b).unwrap();
        assert_eq!(gb.as_slice(), &[3.0, 0.0]);
        // dL/dx = 3 * W row0 (active unit only)
        let gx = grads.vector(x).unwrap();
        assert_eq!(gx.as_slice(), &[3.0, 1.5]);
        // dL/dw2 = relu output
        let gw2 = grads.vector(w2).unwrap();
        assert!((gw2[0] - 0.1).abs() < 1e-15);
        assert_eq!(gw2[1], 0.0);
    }

    #[test]
    fn softmax_jacobian() {
        // loss = softmax(x)[0]; dL/dx_i = y_0 (delta_0i - y_i)
        let mut tape = Tape::new();
        let x = tape.leaf_vector(Vector::new(vec![1.0, 2.0, 3.0]).unwrap());
        let sm = tape.softmax(x).unwrap();
        let loss = tape.index(sm, 0);
        let y = tape.vector_value(sm).clone();
        let grads = tape.backward(loss).unwrap();
        let gx = grads.vector(x).unwrap();
        for i in 0..3 {
            let expect = y[0] * (if i == 0 { 1.0 } else { 0.0 } - y[i]);
            assert!((gx[i] - expect).abs() < 1e-14, "component {i}");
        }
    }

    #[test]
    fn sigmoid_and_affine() {
        let mut tape = Tape::new();
        let x = tape.leaf_scalar(0.0);
        let s = tape.sigmoid(x);
        assert_eq!(tape.scalar_value(s), 0.5);
        let y = tape.affine_const(s, -2.0, 1.0); // 1 - 2*sigmoid(x)
        let grads = tape.backward(y).unwrap();
        // d/dx = -2 * s(1-s) = -0.5
        assert!((grads.scalar(x).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.leaf_scalar(2.0);
        let unused = tape.leaf_scalar(5.0);
        let loss = tape.square(used);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.scalar(unused).unwrap(), 0.0);
    }

    #[test]
    fn row_lookup_routes_gradient_to_row() {
        let mut tape = Tape::new();
        let table = tape.leaf_matrix(Matrix::new(2, 3, vec![1.0; 6]).unwrap());
        let row = tape.row_lookup(table, 1).unwrap();
        let sq = tape.sum_squares(row);
        let grads = tape.backward(sq).unwrap();
        let gt = grads.matrix(table).unwrap();
        assert_eq!(gt.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(gt.row(1), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn backward_rejects_nonscalar_output() {
        let mut tape = Tape::new();
        let v = tape.leaf_vector(Vector::zeros(2));
        assert!(tape.backward(v).is_err());
    }
}
