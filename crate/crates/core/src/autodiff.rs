//! Scalar abstraction shared by plain `f64` evaluation and a reverse-mode
//! tape, so the score network has a single code path for inference and
//! for exact parameter gradients.

use std::cell::RefCell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;
    /// `min(self, c)` with the gradient of the active branch.
    fn min_c(self, c: f64) -> Self;

    fn silu(self) -> Self {
        self * self.sigmoid()
    }

    fn square(self) -> Self {
        self * self
    }

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self;
    fn dot_f(a: &[Self], b: &[f64]) -> Self;
    fn sum(a: &[Self]) -> Self;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    fn softplus(self) -> Self {
        softplus(self)
    }
    fn min_c(self, c: f64) -> Self {
        self.min(c)
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    fn dot_f(a: &[Self], b: &[f64]) -> Self {
        Self::dot(a, b)
    }
    fn sum(a: &[Self]) -> Self {
        a.iter().sum()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

const CONST_IDX: u32 = u32::MAX;

#[derive(Default)]
struct TapeInner {
    /// `offsets[k]..offsets[k + 1]` indexes the parents of node `k`.
    offsets: Vec<usize>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// Records every operation on [`Var`]s as a node with its parents and
/// local partial derivatives.
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { inner: RefCell::new(TapeInner { offsets: vec![0], ..Default::default() }) }
    }

    /// Drops all nodes while keeping allocations.
    pub fn clear(&self) {
        let mut t = self.inner.borrow_mut();
        t.offsets.clear();
        t.offsets.push(0);
        t.parents.clear();
        t.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn var(&self, v: f64) -> Var<'_> {
        let idx = self.push(std::iter::empty());
        Var { tape: Some(self), idx, v }
    }

    fn push(&self, parents: impl IntoIterator<Item = (u32, f64)>) -> u32 {
        let mut t = self.inner.borrow_mut();
        for (p, d) in parents {
            t.parents.push(p);
            t.partials.push(d);
        }
        let end = t.parents.len();
        t.offsets.push(end);
        let idx = t.offsets.len() - 2;
        assert!(idx < CONST_IDX as usize, "tape overflow");
        idx as u32
    }

    /// Adjoints of every node with respect to `out`.
    pub fn gradient(&self, out: Var<'_>) -> Gradient {
        let t = self.inner.borrow();
        let n = t.offsets.len() - 1;
        let mut adj = vec![0.0; n];
        if out.idx != CONST_IDX {
            adj[out.idx as usize] = 1.0;
            for k in (0..=out.idx as usize).rev() {
                let a = adj[k];
                if a == 0.0 {
                    continue;
                }
                for e in t.offsets[k]..t.offsets[k + 1] {
                    adj[t.parents[e] as usize] += a * t.partials[e];
                }
            }
        }
        Gradient { adj }
    }
}

pub struct Gradient {
    adj: Vec<f64>,
}

impl Gradient {
    pub fn wrt(&self, v: &Var<'_>) -> f64 {
        if v.idx == CONST_IDX {
            0.0
        } else {
            self.adj[v.idx as usize]
        }
    }
}

/// A scalar recorded on a [`Tape`], or an untracked constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    v: f64,
}

impl Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.v)
    }
}

impl<'t> Var<'t> {
    pub fn constant(v: f64) -> Self {
        Var { tape: None, idx: CONST_IDX, v }
    }

    pub fn is_tracked(&self) -> bool {
        self.idx != CONST_IDX
    }

    fn unary(self, v: f64, d: f64) -> Self {
        match self.tape {
            Some(t) => Var { tape: Some(t), idx: t.push([(self.idx, d)]), v },
            None => Var::constant(v),
        }
    }

    fn binary(a: Self, b: Self, v: f64, da: f64, db: f64) -> Self {
        match (a.tape, b.tape) {
            (Some(t), Some(_)) => Var { tape: Some(t), idx: t.push([(a.idx, da), (b.idx, db)]), v },
            (Some(t), None) => Var { tape: Some(t), idx: t.push([(a.idx, da)]), v },
            (None, Some(t)) => Var { tape: Some(t), idx: t.push([(b.idx, db)]), v },
            (None, None) => Var::constant(v),
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Var::binary(self, o, self.v + o.v, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Var::binary(self, o, self.v - o.v, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Var::binary(self, o, self.v * o.v, o.v, self.v)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Var::binary(self, o, q, 1.0 / o.v, -q / o.v)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.v, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.v + c, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.v - c, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.v * c, c)
    }
}

impl Div<f64> for Var<'_> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(self.v / c, 1.0 / c)
    }
}

impl AddAssign for Var<'_> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<'t> Real for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.v.ln(), 1.0 / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.unary(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.v.cos(), -self.v.sin())
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid(self.v);
        self.unary(s, s * (1.0 - s))
    }
    fn softplus(self) -> Self {
        self.unary(softplus(self.v), sigmoid(self.v))
    }
    fn silu(self) -> Self {
        let s = sigmoid(self.v);
        self.unary(self.v * s, s * (1.0 + self.v * (1.0 - s)))
    }
    fn min_c(self, c: f64) -> Self {
        if self.v <= c {
            self
        } else {
            Var::constant(c)
        }
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        let v: f64 = a.iter().zip(b).map(|(x, y)| x.v * y.v).sum();
        let tape = a.iter().chain(b).find_map(|x| x.tape);
        match tape {
            None => Var::constant(v),
            Some(t) => {
                let parents = a.iter().zip(b).flat_map(|(x, y)| {
                    let px = x.tape.map(|_| (x.idx, y.v));
                    let py = y.tape.map(|_| (y.idx, x.v));
                    px.into_iter().chain(py)
                });
                Var { tape: Some(t), idx: t.push(parents), v }
            }
        }
    }

    fn dot_f(a: &[Self], b: &[f64]) -> Self {
        let v: f64 = a.iter().zip(b).map(|(x, y)| x.v * y).sum();
        match a.iter().find_map(|x| x.tape) {
            None => Var::constant(v),
            Some(t) => {
                let parents = a.iter().zip(b).filter(|(x, _)| x.tape.is_some()).map(|(x, &y)| (x.idx, y));
                Var { tape: Some(t), idx: t.push(parents), v }
            }
        }
    }

    fn sum(a: &[Self]) -> Self {
        let v: f64 = a.iter().map(|x| x.v).sum();
        match a.iter().find_map(|x| x.tape) {
            None => Var::constant(v),
            Some(t) => {
                let parents = a.iter().filter(|x| x.tape.is_some()).map(|x| (x.idx, 1.0));
                Var { tape: Some(t), idx: t.push(parents), v }
            }
        }
    }
}

/// 3-vector over a [`Real`] scalar.
#[derive(Clone, Copy, Debug)]
pub struct V3<T>(pub [T; 3]);

impl<T: Real> V3<T> {
    pub fn zero() -> Self {
        V3([T::zero(); 3])
    }

    pub fn from_f64(v: &nalgebra::Vector3<f64>) -> Self {
        V3([T::cst(v.x), T::cst(v.y), T::cst(v.z)])
    }

    pub fn value(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.0[0].val(), self.0[1].val(), self.0[2].val())
    }

    pub fn add(&self, o: &Self) -> Self {
        V3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(&self, o: &Self) -> Self {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    pub fn scale(&self, s: T) -> Self {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn scale_f(&self, s: f64) -> Self {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// `s * w` for a constant vector `w`.
    pub fn from_scaled(w: &[f64; 3], s: T) -> Self {
        V3([s * w[0], s * w[1], s * w[2]])
    }

    pub fn dot(&self, o: &Self) -> T {
        T::dot(&self.0, &o.0)
    }

    pub fn dot_f(&self, w: &[f64; 3]) -> T {
        T::dot_f(&self.0, w)
    }

    pub fn cross_f(&self, w: &[f64; 3]) -> Self {
        let a = &self.0;
        V3([a[1] * w[2] - a[2] * w[1], a[2] * w[0] - a[0] * w[2], a[0] * w[1] - a[1] * w[0]])
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    /// `sqrt(|v|^2 + eps^2)`, differentiable at zero.
    pub fn safe_norm(&self, eps: f64) -> T {
        (self.norm_sq() + eps * eps).sqrt()
    }

    /// `M v` for a constant 3x3 matrix.
    pub fn mat_f(m: &nalgebra::Matrix3<f64>, v: &Self) -> Self {
        let row = |i: usize| [m[(i, 0)], m[(i, 1)], m[(i, 2)]];
        V3([v.dot_f(&row(0)), v.dot_f(&row(1)), v.dot_f(&row(2))])
    }

    /// Sum of vectors, one n-ary node per component.
    pub fn sum(vs: &[Self]) -> Self {
        let comp = |k: usize| T::sum(&vs.iter().map(|v| v.0[k]).collect::<Vec<_>>());
        V3([comp(0), comp(1), comp(2)])
    }
}

/// 3x3 matrix over a [`Real`] scalar, row major.
#[derive(Clone, Copy, Debug)]
pub struct M3<T>(pub [[T; 3]; 3]);

impl<T: Real> M3<T> {
    pub fn from_f64(m: &nalgebra::Matrix3<f64>) -> Self {
        M3(std::array::from_fn(|i| std::array::from_fn(|j| T::cst(m[(i, j)]))))
    }

    pub fn mul(&self, o: &Self) -> Self {
        M3(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j])
        }))
    }

    pub fn apply(&self, v: &V3<T>) -> V3<T> {
        V3(std::array::from_fn(|i| T::dot(&self.0[i], &v.0)))
    }

    /// `M^T v`.
    pub fn apply_t(&self, v: &V3<T>) -> V3<T> {
        V3(std::array::from_fn(|j| self.0[0][j] * v.0[0] + self.0[1][j] * v.0[1] + self.0[2][j] * v.0[2]))
    }

    /// Rodrigues exponential of an axis-angle vector.
    pub fn exp(w: &V3<T>) -> Self {
        let theta2 = w.norm_sq();
        let t2 = theta2.val();
        let (a, b) = if t2 < 1e-8 {
            (T::cst(1.0) - theta2 / 6.0, T::cst(0.5) - theta2 / 24.0)
        } else {
            let theta = theta2.sqrt();
            (theta.sin() / theta, (T::cst(1.0) - theta.cos()) / theta2)
        };
        let [x, y, z] = w.0;
        let k = [[T::zero(), -z, y], [z, T::zero(), -x], [-y, x, T::zero()]];
        let kk = M3(k).mul(&M3(k));
        M3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let id = if i == j { 1.0 } else { 0.0 };
                k[i][j] * a + kk.0[i][j] * b + id
            })
        }))
    }

    pub fn value(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_fn(|i, j| self.0[i][j].val())
    }
}
