//! Reverse-mode tape.
//!
//! Every op appends one node holding its output value; node ids are
//! therefore a topological order and `backward` is a single reverse sweep.

use super::kernels::{self, ConvGeometry, PoolGeometry};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    MaxPool {
        input: Var,
        switches: Vec<usize>,
    },
    Relu {
        input: Var,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Reshape {
        input: Var,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Sum {
        input: Var,
    },
    SelectSum {
        input: Var,
        column: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    needs_grad: bool,
    retain: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn into_value(mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::scalar(0.0))
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad, requires_grad)
    }

    /// Keep the gradient of an intermediate node after `backward`.
    pub fn retain_grad(&mut self, v: Var) {
        self.nodes[v.0].retain = true;
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            needs_grad,
            retain: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push(value, op, false, needs)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let x = self.value(input);
        let k = self.value(kernel);
        let b = self.value(bias);
        let geom = ConvGeometry::new(x.shape(), k.shape(), stride, pad)?;
        if b.len() != geom.out_channels {
            return Err(Error::shape(
                "conv2d",
                format!("bias has {} values for {} output channels", b.len(), geom.out_channels),
            ));
        }
        let out = kernels::conv2d_forward(&geom, x.data(), k.data(), b.data());
        let value = Tensor::new(geom.out_shape().to_vec(), out)?;
        Ok(self.push_op(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            },
            &[input, kernel, bias],
        ))
    }

    pub fn maxpool2d(&mut self, input: Var, size: usize, stride: usize) -> Result<Var> {
        let x = self.value(input);
        let geom = PoolGeometry::new(x.shape(), size, stride)?;
        let (out, switches) = kernels::maxpool_forward(&geom, x.data());
        let value = Tensor::new(geom.out_shape().to_vec(), out)?;
        Ok(self.push_op(value, Op::MaxPool { input, switches }, &[input]))
    }

    /// Pooling switches recorded for a max-pool node.
    pub fn switches(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::MaxPool { switches, .. } => Some(switches),
            _ => None,
        }
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let mut data = x.data().to_vec();
        data.iter_mut().for_each(|v| *v = v.max(0.0));
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push_op(value, Op::Relu { input }, &[input])
    }

    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        if x.ndim() != 2 || w.ndim() != 2 {
            return Err(Error::shape(
                "linear",
                format!("expected 2-D input and weight, got {:?} and {:?}", x.shape(), w.shape()),
            ));
        }
        let (n, f) = (x.shape()[0], x.shape()[1]);
        let (o, wf) = (w.shape()[0], w.shape()[1]);
        if wf != f || b.len() != o {
            return Err(Error::shape(
                "linear",
                format!("input {:?}, weight {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        }
        let out = kernels::linear_forward(x.data(), w.data(), b.data(), n, f, o);
        let value = Tensor::new(vec![n, o], out)?;
        Ok(self.push_op(value, Op::Linear { input, weight, bias }, &[input, weight, bias]))
    }

    /// Collapse all trailing axes: `[N, ...] -> [N, prod(...)]`.
    pub fn flatten(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let n = x.shape()[0];
        let value = x.clone().reshape(&[n, x.len() / n]).expect("same size");
        self.push_op(value, Op::Reshape { input }, &[input])
    }

    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let z = self.value(logits);
        if z.ndim() != 2 || z.shape()[0] != labels.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("logits {:?} for {} labels", z.shape(), labels.len()),
            ));
        }
        let classes = z.shape()[1];
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        z.ensure_finite("cross_entropy logits")?;
        let mut probs = Vec::with_capacity(z.len());
        let mut total = 0.0f64;
        for (row, &label) in z.data().chunks(classes).zip(labels) {
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
            let sum: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
            let log_norm = max + sum.ln();
            total += log_norm - row[label] as f64;
            probs.extend(row.iter().map(|&v| (v as f64 - log_norm).exp()));
        }
        let loss = total / labels.len() as f64;
        let value = Tensor::scalar(loss as f32);
        Ok(self.push_op(
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.zip_values("add", a, b, |x, y| x + y)?;
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push_op(value, Op::Add { a, b }, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.zip_values("mul", a, b, |x, y| x * y)?;
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push_op(value, Op::Mul { a, b }, &[a, b]))
    }

    fn zip_values(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f32, f32) -> f32) -> Result<Vec<f32>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", x.shape(), y.shape())));
        }
        Ok(x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect())
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total: f64 = self.value(input).data().iter().map(|&v| v as f64).sum();
        self.push_op(Tensor::scalar(total as f32), Op::Sum { input }, &[input])
    }

    /// `sum_n input[n, column]` for a 2-D input; the scalar root used to
    /// differentiate one class logit across a batch of independent samples.
    pub fn select_sum(&mut self, input: Var, column: usize) -> Result<Var> {
        let x = self.value(input);
        if x.ndim() != 2 || column >= x.shape()[1] {
            return Err(Error::InvalidArgument(format!(
                "column {column} out of range for {:?}",
                x.shape()
            )));
        }
        let cols = x.shape()[1];
        let total: f64 = x.data().chunks(cols).map(|r| r[column] as f64).sum();
        Ok(self.push_op(Tensor::scalar(total as f32), Op::SelectSum { input, column }, &[input]))
    }

    /// Reverse sweep from a scalar root.
    ///
    /// Gradients are kept for leaves created with `requires_grad` and for
    /// nodes marked with [`Graph::retain_grad`].
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0]);
        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            if node.requires_grad || node.retain {
                grads[id] = Some(g);
            }
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                let node = &self.nodes[id];
                match g {
                    Some(data) if node.requires_grad || node.retain => {
                        Some(Tensor::new(node.value.shape().to_vec(), data).expect("grad shape"))
                    }
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            } => {
                let k = self.value(*kernel);
                if self.wants(*kernel) || self.wants(*bias) {
                    let (gk, gb) = kernels::conv2d_backward_params(geom, self.value(*input).data(), g);
                    accumulate(grads, *kernel, gk);
                    accumulate(grads, *bias, gb);
                }
                if self.wants(*input) {
                    accumulate(grads, *input, kernels::conv2d_backward_input(geom, k.data(), g));
                }
            }
            Op::MaxPool { input, switches } => {
                if self.wants(*input) {
                    let len = self.value(*input).len();
                    accumulate(grads, *input, kernels::maxpool_backward(len, switches, g));
                }
            }
            Op::Relu { input } => {
                if self.wants(*input) {
                    let x = self.value(*input).data();
                    let mut gi = g.to_vec();
                    for (d, &v) in gi.iter_mut().zip(x) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(grads, *input, gi);
                }
            }
            Op::Linear { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (n, f, o) = (x.shape()[0], x.shape()[1], w.shape()[0]);
                if self.wants(*weight) || self.wants(*bias) {
                    let (gw, gb) = kernels::linear_backward_params(x.data(), g, n, f, o);
                    accumulate(grads, *weight, gw);
                    accumulate(grads, *bias, gb);
                }
                if self.wants(*input) {
                    accumulate(grads, *input, kernels::linear_backward_input(w.data(), g, n, f, o));
                }
            }
            Op::Reshape { input } => accumulate(grads, *input, g.to_vec()),
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let classes = self.value(*logits).shape()[1];
                let scale = g[0] as f64 / labels.len() as f64;
                let gi = probs
                    .chunks(classes)
                    .zip(labels)
                    .flat_map(|(row, &label)| {
                        row.iter().enumerate().map(move |(c, &p)| {
                            let target = if c == label { 1.0 } else { 0.0 };
                            ((p - target) * scale) as f32
                        })
                    })
                    .collect();
                accumulate(grads, *logits, gi);
            }
            Op::Add { a, b } => {
                accumulate(grads, *a, g.to_vec());
                accumulate(grads, *b, g.to_vec());
            }
            Op::Mul { a, b } => {
                let (x, y) = (self.value(*a).data(), self.value(*b).data());
                accumulate(grads, *a, g.iter().zip(y).map(|(d, v)| d * v).collect());
                accumulate(grads, *b, g.iter().zip(x).map(|(d, v)| d * v).collect());
            }
            Op::Sum { input } => {
                let n = self.value(*input).len();
                accumulate(grads, *input, vec![g[0]; n]);
            }
            Op::SelectSum { input, column } => {
                let x = self.value(*input);
                let cols = x.shape()[1];
                let mut gi = vec![0.0f32; x.len()];
                for row in gi.chunks_mut(cols) {
                    row[*column] = g[0];
                }
                accumulate(grads, *input, gi);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f32>>], v: Var, g: Vec<f32>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(&g) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
