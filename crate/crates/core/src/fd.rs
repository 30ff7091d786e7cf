//! Central-difference jets of scalar potentials.
//!
//! A single tensor-product grid `{-2h,..,2h}^d` yields every partial
//! derivative up to order four through order-2 stencils. Repeating the grid
//! at `h, h/2, h/4, ...` and running a Richardson tableau in `h^2` removes the
//! leading error terms; each entry keeps the tableau element with the
//! smallest error estimate.

/// Step control for derivative stencils.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FdScheme {
    /// Base step `h` of the coarsest stencil.
    pub step: f64,
    /// Number of halvings used by the Richardson tableau (0 = plain order-2 stencils).
    pub levels: usize,
}

impl FdScheme {
    pub fn new(step: f64, levels: usize) -> Self {
        Self { step, levels }
    }

    /// Largest coordinate offset a stencil of this scheme reaches, in Euclidean norm.
    pub fn reach(&self, dim: usize) -> f64 {
        2.0 * self.step * (dim as f64).sqrt()
    }
}

/// Derivatives of a scalar function at a point, stored as dense symmetric tensors.
#[derive(Debug, Clone)]
pub struct Jet {
    pub dim: usize,
    pub value: f64,
    pub grad: Vec<f64>,
    /// `hess[a*d + b]`
    pub hess: Vec<f64>,
    /// `d3[(a*d + b)*d + c]`
    pub d3: Vec<f64>,
    /// `d4[((a*d + b)*d + c)*d + e]`
    pub d4: Vec<f64>,
}

impl Jet {
    pub fn h(&self, a: usize, b: usize) -> f64 {
        self.hess[a * self.dim + b]
    }
    pub fn t3(&self, a: usize, b: usize, c: usize) -> f64 {
        self.d3[(a * self.dim + b) * self.dim + c]
    }
    pub fn t4(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.dim;
        self.d4[((a * d + b) * d + c) * d + e]
    }
}

/// How deep a jet must go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    Two = 2,
    Three = 3,
    Four = 4,
}

// Order-2 central stencils on offsets -2..=2 for derivative multiplicity 0..=4.
const STENCILS: [[f64; 5]; 5] = [
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, -2.0, 1.0, 0.0],
    [-0.5, 1.0, 0.0, -1.0, 0.5],
    [1.0, -4.0, 6.0, -4.0, 1.0],
];

/// Multi-indices (as axis multiplicities) of every distinct derivative up to `max_order`.
fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    fn rec(axis: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if axis == cur.len() {
            out.push(cur.clone());
            return;
        }
        for m in 0..=left {
            cur[axis] = m;
            rec(axis + 1, left - m, cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out
}

/// Evaluates all stencil derivatives of `f` on one grid of step `h`.
fn stencil_pass<F>(f: &F, p: &[f64], h: f64, idx: &[Vec<usize>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let d = p.len();
    let n_pts = 5usize.pow(d as u32);
    let mut vals = vec![0.0; n_pts];
    let mut q = p.to_vec();
    for (k, v) in vals.iter_mut().enumerate() {
        let mut r = k;
        for a in 0..d {
            let off = (r % 5) as f64 - 2.0;
            r /= 5;
            q[a] = p[a] + off * h;
        }
        *v = f(&q);
    }
    idx.iter()
        .map(|mi| {
            let order: usize = mi.iter().sum();
            let mut acc = 0.0;
            for (k, v) in vals.iter().enumerate() {
                let mut r = k;
                let mut w = 1.0;
                for &m in mi.iter() {
                    let s = STENCILS[m][r % 5];
                    r /= 5;
                    if s == 0.0 {
                        w = 0.0;
                        break;
                    }
                    w *= s;
                }
                if w != 0.0 {
                    acc += w * v;
                }
            }
            acc / h.powi(order as i32)
        })
        .collect()
}

/// Richardson tableau in `h^2` with halving steps; returns the entry with the
/// smallest error estimate (Ridders' selection rule).
pub fn richardson_select(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 1 {
        return (samples[0], f64::NAN);
    }
    let mut prev: Vec<f64> = vec![samples[0]];
    let mut best = samples[0];
    let mut best_err = f64::INFINITY;
    for (i, &s) in samples.iter().enumerate().skip(1) {
        let mut row = vec![s];
        let mut fac = 1.0;
        for j in 1..=i {
            fac *= 4.0;
            let v = row[j - 1] + (row[j - 1] - prev[j - 1]) / (fac - 1.0);
            let err = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if err <= best_err {
                best_err = err;
                best = v;
            }
            row.push(v);
        }
        prev = row;
    }
    (best, best_err)
}

/// Derivatives of `f` at `p` up to `order`, extrapolated per `scheme`.
pub fn jet<F>(f: &F, p: &[f64], scheme: FdScheme, order: JetOrder) -> Jet
where
    F: Fn(&[f64]) -> f64,
{
    let d = p.len();
    let idx = multi_indices(d, order as usize);
    let passes: Vec<Vec<f64>> = (0..=scheme.levels)
        .map(|l| stencil_pass(f, p, scheme.step / 2f64.powi(l as i32), &idx))
        .collect();
    let vals: Vec<f64> = (0..idx.len())
        .map(|k| {
            let seq: Vec<f64> = passes.iter().map(|ps| ps[k]).collect();
            richardson_select(&seq).0
        })
        .collect();

    let mut jet = Jet {
        dim: d,
        value: f(p),
        grad: vec![0.0; d],
        hess: vec![0.0; d * d],
        d3: vec![0.0; if order >= JetOrder::Three { d * d * d } else { 0 }],
        d4: vec![0.0; if order >= JetOrder::Four { d * d * d * d } else { 0 }],
    };
    // scatter each multi-index value into every permutation slot of the dense tensor
    let mut slot = Vec::with_capacity(4);
    for (mi, &v) in idx.iter().zip(vals.iter()) {
        slot.clear();
        for (a, &m) in mi.iter().enumerate() {
            for _ in 0..m {
                slot.push(a);
            }
        }
        match slot.len() {
            1 => jet.grad[slot[0]] = v,
            2 => for_each_perm(&slot, |s| jet.hess[s[0] * d + s[1]] = v),
            3 => for_each_perm(&slot, |s| jet.d3[(s[0] * d + s[1]) * d + s[2]] = v),
            4 => for_each_perm(&slot, |s| {
                jet.d4[((s[0] * d + s[1]) * d + s[2]) * d + s[3]] = v
            }),
            _ => {}
        }
    }
    jet
}

fn for_each_perm<G: FnMut(&[usize])>(items: &[usize], mut g: G) {
    let mut v = items.to_vec();
    permute(&mut v, 0, &mut g);
}

fn permute<G: FnMut(&[usize])>(v: &mut Vec<usize>, k: usize, g: &mut G) {
    if k == v.len() {
        g(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, g);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact_to_roundoff() {
        // f = x^2 y + 3 y^4 - x y z
        let f = |q: &[f64]| q[0] * q[0] * q[1] + 3.0 * q[1].powi(4) - q[0] * q[1] * q[2];
        let p = [0.3, -0.2, 0.7];
        let j = jet(&f, &p, FdScheme::new(0.05, 2), JetOrder::Four);
        assert!((j.grad[0] - (2.0 * 0.3 * -0.2 - (-0.2) * 0.7)).abs() < 1e-10);
        assert!((j.h(0, 1) - (2.0 * 0.3 - 0.7)).abs() < 1e-10);
        assert!((j.h(1, 1) - 36.0 * 0.04).abs() < 1e-9);
        assert!((j.t3(0, 1, 2) + 1.0).abs() < 1e-8);
        assert!((j.t3(2, 1, 0) + 1.0).abs() < 1e-8);
        assert!((j.t4(1, 1, 1, 1) - 72.0).abs() < 1e-6);
        assert!(j.t4(0, 0, 1, 1).abs() < 1e-6);
    }

    #[test]
    fn richardson_on_exact_quadratic_error() {
        // S(h) = 1 + h^2: extrapolates to 1
        let s: Vec<f64> = (0..4).map(|l| 1.0 + (0.1 / 2f64.powi(l)).powi(2)).collect();
        let (v, _) = richardson_select(&s);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn multi_index_count() {
        // number of monomials of degree <= 4 in 4 variables
        assert_eq!(multi_indices(4, 4).len(), 70);
        assert_eq!(multi_indices(2, 2).len(), 6);
    }
}
