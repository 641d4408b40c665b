use rand::Rng;

use super::{sigmoid, Params, Tensor2, INIT_SCALE};
use crate::error::{Error, Result};

/// Gate blocks of the stacked weight matrix, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

/// LSTM cell. `weight` stacks the four gate matrices (input, forget, output,
/// cell candidate), each `hidden x (input + hidden)`, acting on `[x; h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            input_dim,
            hidden_dim,
            weight: Tensor2::uniform(4 * hidden_dim, input_dim + hidden_dim, INIT_SCALE, rng),
            bias: Tensor2::uniform(4 * hidden_dim, 1, INIT_SCALE, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            weight: Tensor2::zeros(4 * hidden_dim, input_dim + hidden_dim),
            bias: Tensor2::zeros(4 * hidden_dim, 1),
        }
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_dim;
        let start = gate as usize * h;
        &mut self.bias.data_mut()[start..start + h]
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_dim || h.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::Shape(format!(
                "lstm cell ({} -> {}) got x[{}], h[{}], c[{}]",
                self.input_dim,
                self.hidden_dim,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    fn step_cached(&self, x: &[f64], h: &[f64], c: &[f64]) -> StepCache {
        let hd = self.hidden_dim;
        let mut xh = Vec::with_capacity(self.input_dim + hd);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut z = self.weight.matvec(&xh);
        for (zi, b) in z.iter_mut().zip(self.bias.data()) {
            *zi += b;
        }
        let i: Vec<f64> = z[..hd].iter().map(|v| sigmoid(*v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|v| sigmoid(*v)).collect();
        let o: Vec<f64> = z[2 * hd..3 * hd].iter().map(|v| sigmoid(*v)).collect();
        let g: Vec<f64> = z[3 * hd..].iter().map(|v| v.tanh()).collect();
        let c_new: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        StepCache {
            xh,
            c_prev: c.to_vec(),
            i,
            f,
            o,
            g,
            tanh_c,
            h: h_new,
            c: c_new,
        }
    }

    /// Backprop one step. Returns `(dx, dh_prev, dc_prev)`.
    fn step_backward(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmParams,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, o, g, tc) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            let d_i = dct * g;
            let d_g = dct * i;
            let d_f = dct * cache.c_prev[k];
            dc_prev[k] = dct * f;
            dz[k] = d_i * i * (1.0 - i);
            dz[hd + k] = d_f * f * (1.0 - f);
            dz[2 * hd + k] = d_o * o * (1.0 - o);
            dz[3 * hd + k] = d_g * (1.0 - g * g);
        }
        grad.weight.add_outer(&dz, &cache.xh);
        grad.bias.add_slice(&dz);
        let dxh = self.weight.matvec_t(&dz);
        let dx = dxh[..self.input_dim].to_vec();
        let dh_prev = dxh[self.input_dim..].to_vec();
        (dx, dh_prev, dc_prev)
    }

    /// Runs the cell over `xs` from a zero state.
    pub fn forward_sequence(&self, xs: &[Vec<f64>]) -> Result<LstmTrace> {
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            self.check(x, &h, &c)?;
            let cache = self.step_cached(x, &h, &c);
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            steps.push(cache);
        }
        Ok(LstmTrace {
            steps,
            hidden_dim: self.hidden_dim,
        })
    }

    /// Backprop through a sequence given the loss gradient for each hidden
    /// state. Returns the gradient for each input.
    pub fn backward_sequence(
        &self,
        trace: &LstmTrace,
        dhs: &[Vec<f64>],
        grad: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        assert_eq!(dhs.len(), trace.steps.len());
        let hd = self.hidden_dim;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dxs = vec![Vec::new(); trace.steps.len()];
        for t in (0..trace.steps.len()).rev() {
            let dh: Vec<f64> = dh_next.iter().zip(&dhs[t]).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.step_backward(&trace.steps[t], &dh, &dc_next, grad);
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }

    /// Backprop when only the final hidden state feeds the loss.
    pub fn backward_final(
        &self,
        trace: &LstmTrace,
        dh_last: &[f64],
        grad: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        let n = trace.steps.len();
        let mut dhs = vec![vec![0.0; self.hidden_dim]; n];
        if let Some(last) = dhs.last_mut() {
            last.copy_from_slice(dh_last);
        }
        self.backward_sequence(trace, &dhs, grad)
    }
}

impl Params for LstmParams {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("w".into(), &self.weight), ("b".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        vec![("w".into(), &mut self.weight), ("b".into(), &mut self.bias)]
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

/// Forward activations of a sequence run, kept for backprop.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    hidden_dim: usize,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.steps[t].h
    }

    /// Final hidden state (zeros for an empty sequence).
    pub fn last_hidden(&self) -> Vec<f64> {
        self.steps
            .last()
            .map(|s| s.h.clone())
            .unwrap_or_else(|| vec![0.0; self.hidden_dim])
    }
}

/// One LSTM step from `(h, c)` on input `x`.
pub fn lstm_step(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.check(x, h, c)?;
    let cache = p.step_cached(x, h, c);
    Ok((cache.h, cache.c))
}
