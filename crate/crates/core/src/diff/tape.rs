//! Reverse-mode tape of elementary scalar operations.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{asin_parts, Scalar};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Records operations on [`Var`]s; [`Tape::gradient`] replays them backwards.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every recorded node. Vars created before are invalidated.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [NONE, NONE],
            partials: [0.0, 0.0],
        });
        Var {
            tape: self,
            idx,
            val: value,
        }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            idx: NONE,
            val: value,
        }
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        (nodes.len() - 1) as u32
    }

    fn unary<'t>(&'t self, a: Var<'t>, val: f64, da: f64) -> Var<'t> {
        if a.idx == NONE {
            return self.constant(val);
        }
        let idx = self.push(Node {
            parents: [a.idx, NONE],
            partials: [da, 0.0],
        });
        Var {
            tape: self,
            idx,
            val,
        }
    }

    fn binary<'t>(&'t self, a: Var<'t>, b: Var<'t>, val: f64, da: f64, db: f64) -> Var<'t> {
        match (a.idx == NONE, b.idx == NONE) {
            (true, true) => self.constant(val),
            (false, true) => self.unary(a, val, da),
            (true, false) => self.unary(b, val, db),
            (false, false) => {
                let idx = self.push(Node {
                    parents: [a.idx, b.idx],
                    partials: [da, db],
                });
                Var {
                    tape: self,
                    idx,
                    val,
                }
            }
        }
    }

    /// Reverse accumulation seeded with `∂out/∂seed.0 = seed.1`.
    ///
    /// Returns the adjoint of every recorded node, indexable with [`Var::index`].
    pub fn gradient(&self, seeds: &[(Var<'_>, f64)]) -> Vec<f64> {
        let mut adj = Vec::new();
        self.gradient_into(seeds, &mut adj);
        adj
    }

    /// [`gradient`](Self::gradient) into a reusable buffer.
    pub fn gradient_into(&self, seeds: &[(Var<'_>, f64)], adj: &mut Vec<f64>) {
        let nodes = self.nodes.borrow();
        adj.clear();
        adj.resize(nodes.len(), 0.0);
        for (v, s) in seeds {
            if v.idx != NONE {
                adj[v.idx as usize] += s;
            }
        }
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            for k in 0..2 {
                if n.parents[k] != NONE {
                    adj[n.parents[k] as usize] += a * n.partials[k];
                }
            }
        }
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl<'t> Var<'t> {
    /// Node index into the adjoint vector, `None` for constants.
    pub fn index(&self) -> Option<usize> {
        (self.idx != NONE).then_some(self.idx as usize)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val + o.val, 1.0, 1.0)
    }
}
impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val - o.val, 1.0, -1.0)
    }
}
impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val * o.val, o.val, self.val)
    }
}
impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.tape.binary(self, o, q, 1.0 / o.val, -q / o.val)
    }
}
impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.tape.unary(self, -self.val, -1.0)
    }
}
impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        self.tape.unary(self, self.val + o, 1.0)
    }
}
impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        self.tape.unary(self, self.val - o, 1.0)
    }
}
impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        self.tape.unary(self, self.val * o, o)
    }
}
impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        self.tape.unary(self, self.val / o, 1.0 / o)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        self.val
    }
    fn constant_like(self, v: f64) -> Self {
        self.tape.constant(v)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.tape.unary(self, s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.tape.unary(self, self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.tape.unary(self, self.val.cos(), -self.val.sin())
    }
    fn asin(self) -> Self {
        let (v, dv) = asin_parts(self.val);
        self.tape.unary(self, v, dv)
    }
}
