//! Dense output: piecewise cubic Hermite on a uniform grid.
//!
//! Each node keeps a left and a right derivative so that jumps in the vector
//! field (delay breakpoints, jumps of a piecewise dilution) sit on nodes
//! without degrading the interpolant. Piece `i` spans nodes `i` and `i+1` and
//! uses the right derivative of node `i` and the left derivative of node `i+1`.
//! Only the last piece may be shorter than the grid step.

use alloc::vec::Vec;

use crate::math;
use crate::quad::{hermite, hermite_deriv};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<const K: usize> {
    t0: f64,
    h: f64,
    t_last: f64,
    values: Vec<[f64; K]>,
    d_left: Vec<[f64; K]>,
    d_right: Vec<[f64; K]>,
}

impl<const K: usize> Dense<K> {
    pub fn new(t0: f64, h: f64) -> Self {
        Self {
            t0,
            h,
            t_last: t0,
            values: Vec::new(),
            d_left: Vec::new(),
            d_right: Vec::new(),
        }
    }

    pub fn with_capacity(t0: f64, h: f64, n: usize) -> Self {
        Self {
            t0,
            h,
            t_last: t0,
            values: Vec::with_capacity(n),
            d_left: Vec::with_capacity(n),
            d_right: Vec::with_capacity(n),
        }
    }

    /// Appends the next grid node.
    pub fn push(&mut self, value: [f64; K], d_left: [f64; K], d_right: [f64; K]) {
        self.t_last = self.t0 + self.values.len() as f64 * self.h;
        self.values.push(value);
        self.d_left.push(d_left);
        self.d_right.push(d_right);
    }

    /// Appends a final node at `t`, closer than one step to the previous one.
    pub fn push_at(&mut self, t: f64, value: [f64; K], d_left: [f64; K], d_right: [f64; K]) {
        self.values.push(value);
        self.d_left.push(d_left);
        self.d_right.push(d_right);
        self.t_last = t;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t_last
    }

    pub fn node_time(&self, i: usize) -> f64 {
        if i + 1 == self.values.len() {
            self.t_last
        } else {
            self.t0 + i as f64 * self.h
        }
    }

    pub fn node(&self, i: usize) -> &[f64; K] {
        &self.values[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64; K] {
        &mut self.values[i]
    }

    pub fn d_left(&self, i: usize) -> &[f64; K] {
        &self.d_left[i]
    }

    pub fn d_right(&self, i: usize) -> &[f64; K] {
        &self.d_right[i]
    }

    pub fn d_left_mut(&mut self, i: usize) -> &mut [f64; K] {
        &mut self.d_left[i]
    }

    pub fn d_right_mut(&mut self, i: usize) -> &mut [f64; K] {
        &mut self.d_right[i]
    }

    pub fn last(&self) -> Option<&[f64; K]> {
        self.values.last()
    }

    /// Index of the node at `t` if `t` sits on the grid (to rounding).
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        if (t - self.t_last).abs() <= 1e-9 * self.h {
            return Some(n - 1);
        }
        let r = (t - self.t0) / self.h;
        let k = math::round(r);
        if (r - k).abs() <= 1e-9 && k >= 0.0 && (k as usize) < n {
            Some(k as usize)
        } else {
            None
        }
    }

    fn piece(&self, t: f64) -> usize {
        let n = self.values.len();
        debug_assert!(n >= 2);
        let r = math::floor((t - self.t0) / self.h);
        if r < 0.0 {
            0
        } else {
            (r as usize).min(n - 2)
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.h;
        !self.values.is_empty() && t >= self.t0 - slack && t <= self.t_last + slack
    }

    /// Interpolated component `c` at `t`; extrapolates the end pieces.
    pub fn eval(&self, t: f64, c: usize) -> f64 {
        if self.values.len() == 1 {
            return self.values[0][c];
        }
        let i = self.piece(t);
        let (a, b) = (self.node_time(i), self.node_time(i + 1));
        hermite(
            a,
            b,
            self.values[i][c],
            self.values[i + 1][c],
            self.d_right[i][c],
            self.d_left[i + 1][c],
            t,
        )
    }

    pub fn eval_all(&self, t: f64) -> [f64; K] {
        let mut out = [0.0; K];
        if self.values.len() == 1 {
            return self.values[0];
        }
        let i = self.piece(t);
        let (a, b) = (self.node_time(i), self.node_time(i + 1));
        for (c, o) in out.iter_mut().enumerate() {
            *o = hermite(
                a,
                b,
                self.values[i][c],
                self.values[i + 1][c],
                self.d_right[i][c],
                self.d_left[i + 1][c],
                t,
            );
        }
        out
    }

    /// Derivative of the interpolant at `t` (interior of a piece).
    pub fn deriv(&self, t: f64, c: usize) -> f64 {
        if self.values.len() == 1 {
            return self.d_right[0][c];
        }
        let i = self.piece(t);
        let (a, b) = (self.node_time(i), self.node_time(i + 1));
        hermite_deriv(
            a,
            b,
            self.values[i][c],
            self.values[i + 1][c],
            self.d_right[i][c],
            self.d_left[i + 1][c],
            t,
        )
    }

    /// Drops the first `n` nodes.
    pub fn drop_front(&mut self, n: usize) {
        let n = n.min(self.values.len().saturating_sub(1));
        self.values.drain(..n);
        self.d_left.drain(..n);
        self.d_right.drain(..n);
        self.t0 += n as f64 * self.h;
    }

    /// Multiplies component `c` (values and derivatives) by `k`.
    pub fn scale_component(&mut self, c: usize, k: f64) {
        for v in self.values.iter_mut() {
            v[c] *= k;
        }
        for v in self.d_left.iter_mut() {
            v[c] *= k;
        }
        for v in self.d_right.iter_mut() {
            v[c] *= k;
        }
    }

    /// Adds `k` to component `c` (derivatives unchanged).
    pub fn shift_component(&mut self, c: usize, k: f64) {
        for v in self.values.iter_mut() {
            v[c] += k;
        }
    }

    pub fn values(&self) -> impl Iterator<Item = (f64, &[f64; K])> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.node_time(i), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_last_piece_interpolates_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let mut d = Dense::<1>::new(0.0, 0.25);
        for i in 0..4 {
            let t = 0.25 * i as f64;
            d.push([f(t)], [df(t)], [df(t)]);
        }
        d.push_at(0.9, [f(0.9)], [df(0.9)], [df(0.9)]);
        assert_eq!(d.end(), 0.9);
        for &t in &[0.1, 0.3, 0.77, 0.8, 0.9] {
            assert!((d.eval(t, 0) - f(t)).abs() < 1e-14);
        }
        assert_eq!(d.node_at(0.5), Some(2));
        assert_eq!(d.node_at(0.9), Some(4));
        assert_eq!(d.node_at(0.6), None);
    }

    #[test]
    fn drop_front_keeps_absolute_times() {
        let mut d = Dense::<1>::new(1.0, 0.5);
        for i in 0..6 {
            d.push([i as f64], [2.0], [2.0]);
        }
        d.drop_front(2);
        assert_eq!(d.start(), 2.0);
        assert!((d.eval(2.25, 0) - 2.5).abs() < 1e-15);
    }
}
