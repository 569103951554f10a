//! Crank–Nicolson finite differences with ghost-node Robin closures.
//!
//! Grids are vertex-centred: `N` nodes at spacing `h = L/(N-1)` with nodes
//! sitting on both walls. A wall condition `∂C/∂ν = s·C` is closed with a
//! ghost node eliminated by the centred difference
//! `(C_ghost - C_interior)/(2h) = s·C_wall` (signs follow the outward
//! direction of the ghost), which keeps the scheme second order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenspectrum::AxisSpec;
use crate::error::{Error, Result};
use crate::greens::Room;

/// Sign convention used for the wall slope at `ν = L`.
///
/// `Series` imposes `∂C/∂ν = β₂C` at the far wall, the same boundary-value
/// problem the eigenfunction expansion is built on. `Outflow` imposes
/// `∂C/∂ν = -β₂C`, which removes mass through the far wall when `β₂ > 0`.
/// Both use `∂C/∂ν = β₁C` at `ν = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobinClosure {
    #[default]
    Series,
    Outflow,
}

impl RobinClosure {
    /// Wall slopes `(s_lo, s_hi)` such that `∂C/∂ν = s·C` on each wall.
    pub fn slopes(self, axis: &AxisSpec) -> (f64, f64) {
        match self {
            RobinClosure::Series => (axis.beta_lo(), axis.beta_hi()),
            RobinClosure::Outflow => (axis.beta_lo(), -axis.beta_hi()),
        }
    }
}

/// Time stepping controls shared by the 1-D and 3-D solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// Upper bound on the time step; the span is divided into equal steps
    /// no longer than this.
    pub max_dt: f64,
    #[serde(default)]
    pub closure: RobinClosure,
}

impl StepConfig {
    pub fn new(max_dt: f64, closure: RobinClosure) -> Self {
        Self { max_dt, closure }
    }

    fn steps(&self, t_span: (f64, f64)) -> Result<(usize, f64)> {
        let (t0, t1) = t_span;
        if !(self.max_dt > 0.0 && self.max_dt.is_finite()) {
            return Err(Error::invalid("oracle.max_dt", "must be positive and finite"));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(Error::invalid("oracle.t_span", "need finite t_end >= t_start"));
        }
        if t1 == t0 {
            return Ok((0, 0.0));
        }
        let n = ((t1 - t0) / self.max_dt).ceil().max(1.0) as usize;
        Ok((n, (t1 - t0) / n as f64))
    }
}

/// Node values on a uniform 1-D grid spanning `[0, length]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1d {
    pub length: f64,
    pub values: Vec<f64>,
}

impl Grid1d {
    pub fn from_fn(length: f64, nodes: usize, f: impl FnMut(f64) -> f64) -> Self {
        let h = length / (nodes - 1) as f64;
        let values = (0..nodes).map(|i| i as f64 * h).map(f).collect();
        Self { length, values }
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.values.len() - 1) as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Trapezoidal integral, the discrete mass the scheme conserves.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.spacing() * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }
}

/// Node values on a uniform box grid, stored x-major (`[x][y][z]`, z fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid3d {
    pub lengths: [f64; 3],
    pub nodes: [usize; 3],
    pub values: Vec<f64>,
}

impl Grid3d {
    pub fn zeros(lengths: [f64; 3], nodes: [usize; 3]) -> Self {
        Self {
            lengths,
            nodes,
            values: vec![0.0; nodes[0] * nodes[1] * nodes[2]],
        }
    }

    /// Outer product `fx(x)·fy(y)·fz(z)` of three per-axis node vectors.
    pub fn separable(lengths: [f64; 3], factors: [&[f64]; 3]) -> Self {
        let nodes = [factors[0].len(), factors[1].len(), factors[2].len()];
        let mut g = Self::zeros(lengths, nodes);
        let plane = nodes[1] * nodes[2];
        g.values.par_chunks_mut(plane).enumerate().for_each(|(i, p)| {
            let fx = factors[0][i];
            for (j, row) in p.chunks_mut(nodes[2]).enumerate() {
                let fxy = fx * factors[1][j];
                for (v, fz) in row.iter_mut().zip(factors[2]) {
                    *v = fxy * fz;
                }
            }
        });
        g
    }

    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.lengths[a] / (self.nodes[a] - 1) as f64)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nodes[1] + j) * self.nodes[2] + k
    }

    /// Node indices of `point`, which must coincide with a grid node.
    pub fn node_of(&self, point: [f64; 3]) -> Result<[usize; 3]> {
        let h = self.spacing();
        let mut out = [0; 3];
        for a in 0..3 {
            let r = point[a] / h[a];
            let k = r.round();
            if (r - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.nodes[a] {
                return Err(Error::invalid(
                    "oracle.probe",
                    format!("coordinate {} is not a node of a grid with spacing {}", point[a], h[a]),
                ));
            }
            out[a] = k as usize;
        }
        Ok(out)
    }

    pub fn at(&self, point: [f64; 3]) -> Result<f64> {
        let [i, j, k] = self.node_of(point)?;
        Ok(self.values[self.index(i, j, k)])
    }
}

/// Tridiagonal matrix with constant-per-row coefficients.
#[derive(Clone, Debug)]
struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiag {
    /// Semi-discrete operator `K ∂²/∂ν²` with the ghost-node closure.
    fn laplacian(axis: &AxisSpec, nodes: usize, closure: RobinClosure) -> Self {
        let h = axis.length / (nodes - 1) as f64;
        let c = axis.diffusivity / (h * h);
        let (s_lo, s_hi) = closure.slopes(axis);
        let mut lower = vec![c; nodes];
        let mut diag = vec![-2.0 * c; nodes];
        let mut upper = vec![c; nodes];
        lower[0] = 0.0;
        upper[nodes - 1] = 0.0;
        // C[-1] = C[1] - 2h s_lo C[0];  C[N] = C[N-2] + 2h s_hi C[N-1].
        upper[0] = 2.0 * c;
        diag[0] -= 2.0 * h * s_lo * c;
        lower[nodes - 1] = 2.0 * c;
        diag[nodes - 1] += 2.0 * h * s_hi * c;
        Self { lower, diag, upper }
    }

    /// `I + scale·self`.
    fn shifted(&self, scale: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 + scale * v).collect(),
            upper: self.upper.iter().map(|v| scale * v).collect(),
        }
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn factor(&self) -> Result<Factor> {
        let n = self.len();
        let mut pivot = vec![0.0; n];
        let mut mult = vec![0.0; n];
        pivot[0] = self.diag[0];
        for i in 1..n {
            if pivot[i - 1] == 0.0 || !pivot[i - 1].is_finite() {
                return Err(Error::Oracle(format!("zero pivot at row {} of the tridiagonal solve", i - 1)));
            }
            mult[i] = self.lower[i] / pivot[i - 1];
            pivot[i] = self.diag[i] - mult[i] * self.upper[i - 1];
        }
        if pivot[n - 1] == 0.0 || !pivot[n - 1].is_finite() {
            return Err(Error::Oracle(format!("zero pivot at row {} of the tridiagonal solve", n - 1)));
        }
        Ok(Factor {
            mult,
            inv_pivot: pivot.iter().map(|p| 1.0 / p).collect(),
            upper: self.upper.clone(),
        })
    }
}

/// LU factors of a tridiagonal matrix (Thomas algorithm).
#[derive(Clone, Debug)]
struct Factor {
    mult: Vec<f64>,
    inv_pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl Factor {
    /// Solve in place for `stride` interleaved right-hand sides: entry `i`
    /// of system `j` lives at `data[i * stride + j]`.
    fn solve(&self, data: &mut [f64], stride: usize) {
        let n = self.mult.len();
        for i in 1..n {
            let m = self.mult[i];
            let (prev, cur) = data.split_at_mut(i * stride);
            let prev = &prev[(i - 1) * stride..];
            for (c, p) in cur[..stride].iter_mut().zip(prev) {
                *c -= m * p;
            }
        }
        let last = (n - 1) * stride;
        let ip = self.inv_pivot[n - 1];
        data[last..last + stride].iter_mut().for_each(|v| *v *= ip);
        for i in (0..n - 1).rev() {
            let (u, ip) = (self.upper[i], self.inv_pivot[i]);
            let (cur, next) = data.split_at_mut((i + 1) * stride);
            for (c, x) in cur[i * stride..].iter_mut().zip(&next[..stride]) {
                *c = (*c - u * x) * ip;
            }
        }
    }

    /// Same as [`Factor::solve`] with the row updates spread over threads.
    fn solve_parallel(&self, data: &mut [f64], stride: usize) {
        const MIN: usize = 2048;
        let n = self.mult.len();
        for i in 1..n {
            let m = self.mult[i];
            let (prev, cur) = data.split_at_mut(i * stride);
            let prev = &prev[(i - 1) * stride..];
            cur[..stride]
                .par_iter_mut()
                .with_min_len(MIN)
                .zip(prev.par_iter())
                .for_each(|(c, p)| *c -= m * p);
        }
        let last = (n - 1) * stride;
        let ip = self.inv_pivot[n - 1];
        data[last..last + stride]
            .par_iter_mut()
            .with_min_len(MIN)
            .for_each(|v| *v *= ip);
        for i in (0..n - 1).rev() {
            let (u, ip) = (self.upper[i], self.inv_pivot[i]);
            let (cur, next) = data.split_at_mut((i + 1) * stride);
            cur[i * stride..]
                .par_iter_mut()
                .with_min_len(MIN)
                .zip(next[..stride].par_iter())
                .for_each(|(c, x)| *c = (*c - u * x) * ip);
        }
    }
}

/// Advance a 1-D field from `t_span.0` to `t_span.1` by Crank–Nicolson.
pub fn fdm_evolve_1d(axis: &AxisSpec, initial: &Grid1d, t_span: (f64, f64), step: &StepConfig) -> Result<Grid1d> {
    axis.validate("axis")?;
    let nodes = initial.values.len();
    if nodes < 3 {
        return Err(Error::invalid("oracle.nodes", "need at least 3 nodes"));
    }
    if (initial.length - axis.length).abs() > 1e-12 * axis.length {
        return Err(Error::invalid("oracle.initial", "grid length differs from the axis length"));
    }
    if initial.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("oracle.initial", "field must be finite"));
    }
    let (count, dt) = step.steps(t_span)?;
    let a = Tridiag::laplacian(axis, nodes, step.closure);
    let explicit = a.shifted(0.5 * dt);
    let implicit = a.shifted(-0.5 * dt).factor()?;

    let mut u = initial.values.clone();
    let mut rhs = vec![0.0; nodes];
    for _ in 0..count {
        apply_line(&explicit, &u, &mut rhs);
        implicit.solve(&mut rhs, 1);
        std::mem::swap(&mut u, &mut rhs);
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Oracle("1-D field became non-finite".into()));
    }
    Ok(Grid1d {
        length: initial.length,
        values: u,
    })
}

fn apply_line(m: &Tridiag, src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    dst[0] = m.diag[0] * src[0] + m.upper[0] * src[1];
    for i in 1..n - 1 {
        dst[i] = m.lower[i] * src[i - 1] + m.diag[i] * src[i] + m.upper[i] * src[i + 1];
    }
    dst[n - 1] = m.lower[n - 1] * src[n - 2] + m.diag[n - 1] * src[n - 1];
}

/// One axis of the box grid: its operator and the memory layout of its lines.
struct AxisOp {
    op: Tridiag,
    factor: Factor,
    n: usize,
    stride: usize,
}

impl AxisOp {
    /// `dst = scale · A src` along this axis.
    fn apply(&self, src: &[f64], dst: &mut [f64], scale: f64) {
        let (n, stride) = (self.n, self.stride);
        let a = &self.op;
        let row = |i: usize, block: &[f64], out: &mut [f64]| {
            let base = i * stride;
            for j in 0..stride {
                let mut v = a.diag[i] * block[base + j];
                if i > 0 {
                    v += a.lower[i] * block[base - stride + j];
                }
                if i + 1 < n {
                    v += a.upper[i] * block[base + stride + j];
                }
                out[j] = scale * v;
            }
        };
        if stride == 1 {
            dst.par_chunks_mut(n)
                .zip(src.par_chunks(n))
                .for_each(|(out, line)| {
                    for i in 0..n {
                        row(i, line, &mut out[i..i + 1]);
                    }
                });
        } else {
            let block = n * stride;
            dst.par_chunks_mut(stride).enumerate().for_each(|(g, out)| {
                let (b, i) = (g / n, g % n);
                row(i, &src[b * block..(b + 1) * block], out);
            });
        }
    }

    fn solve(&self, data: &mut [f64]) {
        let block = self.n * self.stride;
        if block == data.len() {
            self.factor.solve_parallel(data, self.stride);
        } else {
            data.par_chunks_mut(block)
                .for_each(|b| self.factor.solve(b, self.stride));
        }
    }
}

/// Advance a box field by Douglas–Gunn alternating-direction implicit steps
/// (Crank–Nicolson weighting, second order in space and time).
pub fn fdm_evolve_3d(room: &Room, initial: &Grid3d, t_span: (f64, f64), step: &StepConfig) -> Result<Grid3d> {
    room.validate()?;
    let axes = room.axes();
    for a in 0..3 {
        if initial.nodes[a] < 3 {
            return Err(Error::invalid("oracle.nodes", "need at least 3 nodes per axis"));
        }
        if (initial.lengths[a] - axes[a].length).abs() > 1e-12 * axes[a].length {
            return Err(Error::invalid("oracle.initial", "grid lengths differ from the room"));
        }
    }
    if initial.values.len() != initial.nodes.iter().product::<usize>() {
        return Err(Error::invalid("oracle.initial", "value count does not match the node counts"));
    }
    if initial.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("oracle.initial", "field must be finite"));
    }
    let (count, dt) = step.steps(t_span)?;
    let [_, ny, nz] = initial.nodes;
    let strides = [ny * nz, nz, 1];
    let ops = (0..3)
        .map(|a| {
            let op = Tridiag::laplacian(&axes[a], initial.nodes[a], step.closure);
            let factor = op.shifted(-0.5 * dt).factor()?;
            Ok(AxisOp {
                op,
                factor,
                n: initial.nodes[a],
                stride: strides[a],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let len = initial.values.len();
    let mut u = initial.values.clone();
    let mut ay = vec![0.0; len];
    let mut az = vec![0.0; len];
    let mut w = vec![0.0; len];
    for _ in 0..count {
        // (I - dt/2 Ax) u* = u + dt (Ax/2 + Ay + Az) u
        ops[0].apply(&u, &mut w, 0.5 * dt);
        ops[1].apply(&u, &mut ay, 0.5 * dt);
        ops[2].apply(&u, &mut az, 0.5 * dt);
        w.par_iter_mut()
            .zip(u.par_iter())
            .zip(ay.par_iter().zip(az.par_iter()))
            .for_each(|((w, u), (y, z))| *w += u + 2.0 * (y + z));
        ops[0].solve(&mut w);
        // (I - dt/2 Ay) u** = u* - dt/2 Ay u
        w.par_iter_mut().zip(ay.par_iter()).for_each(|(w, y)| *w -= y);
        ops[1].solve(&mut w);
        // (I - dt/2 Az) u⁺ = u** - dt/2 Az u
        w.par_iter_mut().zip(az.par_iter()).for_each(|(w, z)| *w -= z);
        ops[2].solve(&mut w);
        std::mem::swap(&mut u, &mut w);
    }
    if u.par_iter().any(|v| !v.is_finite()) {
        return Err(Error::Oracle("3-D field became non-finite".into()));
    }
    Ok(Grid3d {
        lengths: initial.lengths,
        nodes: initial.nodes,
        values: u,
    })
}

/// Second-order Richardson extrapolation from a coarse and a half-spacing run.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}
