//! One classical RK4 step of a fixed-delay system whose past lives in a [`Dense`].

use crate::dense::Dense;
use crate::signal::Side;

/// State at `q`, read from a node when `q` is on the grid.
#[inline]
pub(crate) fn read<const K: usize>(dense: &Dense<K>, q: f64) -> [f64; K] {
    match dense.node_at(q) {
        Some(i) => *dense.node(i),
        None => dense.eval_all(q),
    }
}

#[inline]
fn axpy<const K: usize>(a: &[f64; K], k: f64, b: &[f64; K]) -> [f64; K] {
    let mut out = *a;
    for c in 0..K {
        out[c] += k * b[c];
    }
    out
}

/// Advances `y0` at `t` by `step`. `field(t, side, state, lagged_state)` is the
/// vector field; for `tau == 0` the lagged state is the stage state itself.
///
/// Returns the new state and the first stage (the right derivative at `t`).
pub(crate) fn rk4_step<const K: usize, F>(
    dense: &Dense<K>,
    tau: f64,
    t: f64,
    step: f64,
    y0: &[f64; K],
    field: &F,
) -> ([f64; K], [f64; K])
where
    F: Fn(f64, Side, &[f64; K], &[f64; K]) -> [f64; K],
{
    let lag = |q: f64, st: &[f64; K]| if tau == 0.0 { *st } else { read(dense, q - tau) };
    let k1 = field(t, Side::Right, y0, &lag(t, y0));
    let tm = t + 0.5 * step;
    let y1 = axpy(y0, 0.5 * step, &k1);
    let k2 = field(tm, Side::Right, &y1, &lag(tm, &y1));
    let y2 = axpy(y0, 0.5 * step, &k2);
    let k3 = field(tm, Side::Right, &y2, &lag(tm, &y2));
    let te = t + step;
    let y3 = axpy(y0, step, &k3);
    let k4 = field(te, Side::Left, &y3, &lag(te, &y3));
    let mut next = *y0;
    for c in 0..K {
        next[c] += step / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    }
    (next, k1)
}

/// Vector field at a node, one-sided.
#[inline]
pub(crate) fn node_field<const K: usize, F>(
    dense: &Dense<K>,
    tau: f64,
    t: f64,
    side: Side,
    st: &[f64; K],
    field: &F,
) -> [f64; K]
where
    F: Fn(f64, Side, &[f64; K], &[f64; K]) -> [f64; K],
{
    let lag = if tau == 0.0 { *st } else { read(dense, t - tau) };
    field(t, side, st, &lag)
}
