//! Binary linear classifiers, multiclass ReLU networks and the exact local
//! linearization of a ReLU network around an input.

use crate::error::{Error, Result};

/// Left-to-right round-to-nearest dot product. This summation order is part
/// of the victim computation and must not change.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Left-to-right round-to-nearest Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self · rhs`, each entry a left-to-right dot product.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, rhs.rows)?;
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(i, k) * rhs.get(k, j);
                }
                out.data[i * rhs.cols + j] = acc;
            }
        }
        Ok(out)
    }
}

/// Binary classifier `sign(w·x + b)` with `sign(0) = +1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<LinearModel> {
        if w.is_empty() {
            return Err(Error::InvalidModel("linear model needs at least one weight".into()));
        }
        if w.iter().chain(std::iter::once(&b)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite linear model parameter".into()));
        }
        Ok(LinearModel { w, b })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x + b` in round-to-nearest, dot product left to right.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), x.len())?;
        Ok(dot(&self.w, x) + self.b)
    }

    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(sign_label(self.score(x)?))
    }
}

#[inline]
pub fn sign_label(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn linear_predict(m: &LinearModel, x: &[f64]) -> Result<i8> {
    m.predict(x)
}

/// One affine layer `h = W z + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Layer> {
        check_dim(weights.rows(), bias.len())?;
        Ok(Layer { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.weights.mul_vec(z)?;
        for (hi, ci) in h.iter_mut().zip(&self.bias) {
            *hi += ci;
        }
        Ok(h)
    }
}

/// Fully connected network: ReLU after every layer except the last.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub scores: Vec<f64>,
    pub label: usize,
}

impl ReluNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<ReluNetwork> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::InvalidModel(format!(
                    "layer output width {} does not feed input width {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        let classes = layers.last().map_or(0, Layer::outputs);
        if classes < 2 {
            return Err(Error::InvalidModel(format!("need at least 2 classes, got {classes}")));
        }
        let finite = layers
            .iter()
            .all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidModel("non-finite network parameter".into()));
        }
        Ok(ReluNetwork { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn hidden_units(&self) -> usize {
        self.layers[..self.layers.len() - 1].iter().map(Layer::outputs).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        check_dim(self.input_dim(), x.len())?;
        let last = self.layers.len() - 1;
        let mut z = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            z = layer.apply(&z)?;
            if i < last {
                relu_in_place(&mut z);
            }
        }
        let label = argmax(&z);
        Ok(Forward { scores: z, label })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.forward(x)?.label)
    }

    /// Index of the highest-scoring class other than `label`.
    pub fn runner_up(&self, scores: &[f64], label: usize) -> usize {
        let mut best = None;
        for (k, &s) in scores.iter().enumerate() {
            if k == label {
                continue;
            }
            match best {
                Some((_, bs)) if bs >= s => {}
                _ => best = Some((k, s)),
            }
        }
        best.map_or(0, |(k, _)| k)
    }

    /// Activation pattern at `x` (strict `h > 0`), one mask per hidden layer.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        Ok(self.linearize(x)?.activation_pattern)
    }

    /// Exact affine form `τ x + τ̂` of the network on the activation region of
    /// `x`. Weights are composed right to left, biases accumulated as
    /// `acc ← τ_i acc + c_i` starting from the first layer.
    pub fn linearize(&self, x: &[f64]) -> Result<Linearization> {
        check_dim(self.input_dim(), x.len())?;
        let first = &self.layers[0];
        let mut h = first.apply(x)?;
        let mut tau = first.weights.clone();
        let mut tau_hat = first.bias.clone();
        let mut masks = Vec::with_capacity(self.layers.len() - 1);
        for layer in &self.layers[1..] {
            let mask: Vec<bool> = h.iter().map(|&v| v > 0.0).collect();
            let mut masked = layer.weights.clone();
            for r in 0..masked.rows() {
                for (w, &on) in masked.row_mut(r).iter_mut().zip(&mask) {
                    if !on {
                        *w = 0.0;
                    }
                }
            }
            relu_in_place(&mut h);
            h = layer.apply(&h)?;
            tau = masked.matmul(&tau)?;
            tau_hat = masked.mul_vec(&tau_hat)?;
            for (t, c) in tau_hat.iter_mut().zip(&layer.bias) {
                *t += c;
            }
            masks.push(mask);
        }
        Ok(Linearization { tau, tau_hat, activation_pattern: ActivationPattern(masks) })
    }

    /// Direction `τ[t] − τ[l]` of steepest increase of `score_t − score_l`
    /// inside the activation region of `x`.
    pub fn perturb_dir(&self, x: &[f64], current: usize, target: usize) -> Result<Vec<f64>> {
        self.check_labels(current, target)?;
        let lin = self.linearize(x)?;
        Ok(lin.direction(current, target))
    }

    pub(crate) fn check_labels(&self, current: usize, target: usize) -> Result<()> {
        let k = self.classes();
        for label in [current, target] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        if current == target {
            return Err(Error::SameLabels(current));
        }
        Ok(())
    }
}

pub fn relu_forward(net: &ReluNetwork, x: &[f64]) -> Result<Forward> {
    net.forward(x)
}

pub fn linearize(net: &ReluNetwork, x: &[f64]) -> Result<Linearization> {
    net.linearize(x)
}

pub fn perturb_dir(net: &ReluNetwork, x: &[f64], current: usize, target: usize) -> Result<Vec<f64>> {
    net.perturb_dir(x, current, target)
}

fn relu_in_place(z: &mut [f64]) {
    for v in z {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
}

/// Lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Per hidden layer, which ReLUs are active.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivationPattern(pub Vec<Vec<bool>>);

impl ActivationPattern {
    pub fn active_count(&self) -> usize {
        self.0.iter().flatten().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    /// K × D
    pub tau: Matrix,
    /// length K
    pub tau_hat: Vec<f64>,
    pub activation_pattern: ActivationPattern,
}

impl Linearization {
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.tau.mul_vec(x)?;
        for (si, bi) in s.iter_mut().zip(&self.tau_hat) {
            *si += bi;
        }
        Ok(s)
    }

    pub fn direction(&self, current: usize, target: usize) -> Vec<f64> {
        self.tau.row(target).iter().zip(self.tau.row(current)).map(|(t, l)| t - l).collect()
    }

    /// The binary model `(τ[t] − τ[l])·x + τ̂[t] − τ̂[l]`, positive where
    /// `target` outscores `current`.
    pub fn difference_model(&self, current: usize, target: usize) -> Result<LinearModel> {
        LinearModel::new(
            self.direction(current, target),
            self.tau_hat[target] - self.tau_hat[current],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_net(out_bias: [f64; 2]) -> ReluNetwork {
        ReluNetwork::new(vec![
            Layer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0]).unwrap(),
            Layer::new(Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(), out_bias.to_vec())
                .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn linear_labels() {
        let m = LinearModel::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(linear_predict(&m, &[2.0, 0.0]).unwrap(), 1);
        let m = LinearModel::new(vec![1.0], -1.0).unwrap();
        assert_eq!(m.predict(&[0.5]).unwrap(), -1);
        let m = LinearModel::new(vec![1.0], 0.0).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 1);
        assert_eq!(
            m.predict(&[0.0, 1.0]).unwrap_err(),
            Error::DimensionMismatch { expected: 1, got: 2 }
        );
        assert!(LinearModel::new(vec![], 0.0).is_err());
        assert!(LinearModel::new(vec![f64::NAN], 0.0).is_err());
    }

    #[test]
    fn tiny_forward() {
        let net = tiny_net([0.0, 0.0]);
        let f = net.forward(&[2.0]).unwrap();
        assert_eq!(f.scores, vec![2.0, -2.0]);
        assert_eq!(f.label, 0);
        let f = net.forward(&[-3.0]).unwrap();
        assert_eq!(f.scores, vec![0.0, 0.0]);
        assert_eq!(f.label, 0);
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn tiny_linearization() {
        let net = tiny_net([0.0, 0.0]);
        let lin = net.linearize(&[2.0]).unwrap();
        assert_eq!(lin.tau, Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap());
        assert_eq!(lin.tau_hat, vec![0.0, 0.0]);
        assert_eq!(lin.activation_pattern, ActivationPattern(vec![vec![true]]));
        let lin = net.linearize(&[-3.0]).unwrap();
        assert_eq!(lin.tau, Matrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap());
        assert_eq!(lin.activation_pattern, ActivationPattern(vec![vec![false]]));
        assert_eq!(net.perturb_dir(&[2.0], 0, 1).unwrap(), vec![-2.0]);
        assert_eq!(net.perturb_dir(&[2.0], 1, 1).unwrap_err(), Error::SameLabels(1));
        assert!(net.perturb_dir(&[2.0], 0, 5).is_err());
    }

    #[test]
    fn zero_preactivation_is_inactive() {
        let net = tiny_net([0.0, 0.0]);
        let lin = net.linearize(&[0.0]).unwrap();
        assert_eq!(lin.activation_pattern.active_count(), 0);
    }

    #[test]
    fn fully_active_net_collapses() {
        // two positive hidden layers, positive input: every ReLU is on
        let net = ReluNetwork::new(vec![
            Layer::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 1.0]]).unwrap(), vec![1.0, 0.0])
                .unwrap(),
            Layer::new(Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap(), vec![0.0, 2.0])
                .unwrap(),
        ])
        .unwrap();
        let x = [1.0, 2.0];
        let lin = net.linearize(&x).unwrap();
        // theta_2 · theta_1 and theta_2 · c_1 + c_2, by hand
        assert_eq!(lin.tau, Matrix::from_rows(&[vec![2.5, 5.0], vec![2.5, 5.0]]).unwrap());
        assert_eq!(lin.tau_hat, vec![2.0, 3.0]);
        assert_eq!(lin.evaluate(&x).unwrap(), net.forward(&x).unwrap().scores);
        assert_eq!(net.linearize(&[3.0, 0.5]).unwrap().tau, lin.tau);
    }

    #[test]
    fn runner_up_prefers_lowest_index_on_ties() {
        let net = tiny_net([0.0, 0.0]);
        assert_eq!(net.runner_up(&[1.0, 0.5, 0.5], 0), 1);
        assert_eq!(net.runner_up(&[0.2, 0.9, 0.2], 1), 0);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn network_validation() {
        let l1 = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3]).unwrap();
        let l2 = Layer::new(Matrix::zeros(2, 4), vec![0.0; 2]).unwrap();
        assert!(ReluNetwork::new(vec![l1.clone(), l2]).is_err());
        assert!(ReluNetwork::new(vec![Layer::new(Matrix::zeros(1, 2), vec![0.0]).unwrap()]).is_err());
        assert!(ReluNetwork::new(vec![]).is_err());
        assert!(Layer::new(Matrix::zeros(3, 2), vec![0.0; 2]).is_err());
    }
}
