//! Independent reference implementations for the integration tests. Only
//! the MRP's raw data is read from the library; every operator below is
//! recomputed with plain vectors and truncated sums.

#![allow(dead_code)]

use proptest::prelude::*;
use tdlab::Mrp;

/// Dense copy of an MRP.
pub struct Dense {
    pub p: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub g: f64,
    pub term: Vec<bool>,
}

impl Dense {
    pub fn of(m: &Mrp) -> Self {
        let n = m.n_states();
        Self {
            p: (0..n)
                .map(|i| (0..n).map(|j| m.transition()[(i, j)]).collect())
                .collect(),
            r: m.reward().iter().copied().collect(),
            g: m.discount(),
            term: m.terminal().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn mask(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.term)
            .map(|(&x, &t)| if t { 0.0 } else { x })
            .collect()
    }

    /// `γ P x` with terminal outputs forced to zero.
    pub fn step(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                if self.term[i] {
                    0.0
                } else {
                    self.g * self.p[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                }
            })
            .collect()
    }

    pub fn bellman(&self, v: &[f64]) -> Vec<f64> {
        let v = self.mask(v);
        self.step(&v)
            .iter()
            .enumerate()
            .map(|(i, x)| if self.term[i] { 0.0 } else { self.r[i] + x })
            .collect()
    }

    /// `v_π` by Gaussian elimination with partial pivoting.
    pub fn values(&self) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.n()).filter(|&s| !self.term[s]).collect();
        let k = idx.len();
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut row: Vec<f64> = (0..k)
                    .map(|j| f64::from(u8::from(i == j)) - self.g * self.p[idx[i]][idx[j]])
                    .collect();
                row.push(self.r[idx[i]]);
                row
            })
            .collect();
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in 0..k {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    let pivot_row = a[col].clone();
                    for (x, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                        *x -= f * p;
                    }
                }
            }
        }
        let mut v = vec![0.0; self.n()];
        for (i, &s) in idx.iter().enumerate() {
            v[s] = a[i][k] / a[i][i];
        }
        v
    }
}

/// `v + Σ_{i<terms} h(i) (γP)^i (T v - v)`.
pub fn td_form(d: &Dense, h: impl Fn(usize) -> f64, v: &[f64], terms: usize) -> Vec<f64> {
    let v = d.mask(v);
    let mut acc = v.clone();
    let mut x: Vec<f64> = d.bellman(&v).iter().zip(&v).map(|(a, b)| a - b).collect();
    for i in 0..terms {
        let hi = h(i);
        for (a, xi) in acc.iter_mut().zip(&x) {
            *a += hi * xi;
        }
        x = d.step(&x);
    }
    acc
}

/// `(1 - Σ c) v + Σ_{1≤n≤terms} c(n) T^n v`, with the weight `rest` of
/// all later terms placed on `T^terms v`. Slowly decaying `c` would
/// otherwise leave a truncation error that does not shrink with `γ`.
pub fn nstep_form(d: &Dense, c: impl Fn(usize) -> f64, rest: f64, v: &[f64], terms: usize) -> Vec<f64> {
    let v = d.mask(v);
    let total: f64 = (1..=terms).map(&c).sum::<f64>() + rest;
    let mut acc: Vec<f64> = v.iter().map(|x| (1.0 - total) * x).collect();
    let mut w = v.clone();
    for n in 1..=terms {
        w = d.bellman(&w);
        let cn = c(n);
        for (a, wi) in acc.iter_mut().zip(&w) {
            *a += cn * wi;
        }
    }
    for (a, wi) in acc.iter_mut().zip(&w) {
        *a += rest * wi;
    }
    acc
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random MRP with 2..=6 states, some absorbing terminals, and a discount
/// in `[0, max_gamma]`.
pub fn arb_mrp(max_gamma: f64) -> impl Strategy<Value = Mrp> {
    (2usize..=6).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(prop::bool::weighted(0.25), n),
            0.0..=max_gamma,
        )
            .prop_map(move |(raw, r, term, g)| {
                let rows: Vec<Vec<f64>> = raw
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        if term[i] {
                            (0..n).map(|j| f64::from(u8::from(i == j))).collect()
                        } else {
                            let w: Vec<f64> = row.iter().map(|x| x + 0.01).collect();
                            let s: f64 = w.iter().sum();
                            w.iter().map(|x| x / s).collect()
                        }
                    })
                    .collect();
                let rows = renormalize(rows);
                let r = r.iter().zip(&term).map(|(&x, &t)| if t { 0.0 } else { x }).collect();
                Mrp::new(rows, r, g, term).expect("valid random MRP")
            })
    })
}

/// Pushes each row's rounding error onto its largest entry so rows sum to
/// one within the library's tolerance.
fn renormalize(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|mut row| {
            let s: f64 = row.iter().sum();
            let big = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            row[big] += 1.0 - s;
            row
        })
        .collect()
}

pub fn arb_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}
