use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Dense Adam over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

fn check_finite(name: &str, g: &[f64]) -> Result<()> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFiniteGradient(format!("{name}[{i}] = {}", g[i]))),
        None => Ok(()),
    }
}

impl AdamState {
    pub fn new(sizes: &[usize], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPS,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }

    /// One bias-corrected update. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step(&mut self, params: &mut [(String, &mut [f64])], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, ((name, p), g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != p.len() {
                return Err(Error::Shape(format!(
                    "{name}: param {} / grad {} / state {}",
                    p.len(),
                    g.len(),
                    self.m[k].len()
                )));
            }
            check_finite(name, g)?;
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        for (k, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            update(p, g, &mut self.m[k], &mut self.v[k], self.lr, self.beta1, self.beta2, self.eps, c1, c2);
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, b1: f64, b2: f64, eps: f64, c1: f64, c2: f64) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        p[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

/// Gradient rows for an embedding table, accumulated per touched row in
/// first-touch order.
#[derive(Clone, Debug)]
pub struct SparseRowGrad {
    pub cols: usize,
    slot: Vec<usize>,
    pub rows: Vec<usize>,
    pub data: Vec<f64>,
}

impl SparseRowGrad {
    pub fn new(n_rows: usize, cols: usize) -> Self {
        SparseRowGrad { cols, slot: vec![usize::MAX; n_rows], rows: Vec::new(), data: Vec::new() }
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let mut s = self.slot[r];
        if s == usize::MAX {
            s = self.rows.len();
            self.slot[r] = s;
            self.rows.push(r);
            self.data.resize(self.data.len() + self.cols, 0.0);
        }
        &mut self.data[s * self.cols..(s + 1) * self.cols]
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.data[slot * self.cols..(slot + 1) * self.cols]
    }

    pub fn clear(&mut self) {
        for &r in &self.rows {
            self.slot[r] = usize::MAX;
        }
        self.rows.clear();
        self.data.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dense view, mainly for tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.slot.len() * self.cols];
        for (s, &r) in self.rows.iter().enumerate() {
            out[r * self.cols..(r + 1) * self.cols].copy_from_slice(self.row(s));
        }
        out
    }
}

/// Row-wise lazy Adam for embedding tables: only rows present in the
/// gradient have their moments advanced. Bias correction uses the global
/// step.
#[derive(Clone, Debug)]
pub struct RowAdam {
    pub lr: f64,
    pub step: u64,
    cols: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl RowAdam {
    pub fn new(n_rows: usize, cols: usize, lr: f64) -> Self {
        RowAdam { lr, step: 0, cols, m: vec![0.0; n_rows * cols], v: vec![0.0; n_rows * cols] }
    }

    pub fn step(&mut self, name: &str, table: &mut [f64], grad: &SparseRowGrad) -> Result<()> {
        if table.len() != self.m.len() || grad.cols != self.cols {
            return Err(Error::Shape(format!("{name}: table/optimizer shape mismatch")));
        }
        check_finite(name, &grad.data)?;
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        let c = self.cols;
        for (s, &r) in grad.rows.iter().enumerate() {
            let span = r * c..(r + 1) * c;
            update(
                &mut table[span.clone()],
                grad.row(s),
                &mut self.m[span.clone()],
                &mut self.v[span],
                self.lr,
                BETA1,
                BETA2,
                EPS,
                c1,
                c2,
            );
        }
        Ok(())
    }
}
