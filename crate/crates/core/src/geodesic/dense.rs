//! Deterministic dense sequences `z_1, z_2, ...` used by the pointwise metric.
//!
//! Odd positions walk a coarse net outward (integer lattice shells in the
//! flat models, rings of integer radius on the hyperboloid); even positions
//! walk ever finer dyadic grids over growing boxes (polar grids on the
//! hyperboloid). Every point of the space is approached by the fine stream,
//! while the coarse stream reaches any integer point after few terms. The
//! enumeration is versioned; changing it changes every pointwise distance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ModelKind, Point, SpaceModel};
use crate::error::{invalid, Result};

pub const DENSE_SEQUENCE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSequence {
    pub model: SpaceModel,
    pub version: u32,
}

impl DenseSequence {
    pub fn new(model: &SpaceModel) -> Self {
        DenseSequence { model: model.clone(), version: DENSE_SEQUENCE_VERSION }
    }

    pub fn iter(&self) -> DenseIter {
        DenseIter { coarse: Coarse::new(&self.model), fine: Fine::new(&self.model), odd: true, model: self.model.clone() }
    }

    /// The first `n` points.
    pub fn take(&self, n: usize) -> Vec<Point> {
        self.iter().take(n).collect()
    }

    /// Smallest 1-based index `m ≤ limit` with `ρ(z_m, x) < r`.
    pub fn first_within(&self, x: &Point, r: f64, limit: usize) -> Result<(usize, Point)> {
        self.model.validate(x)?;
        for (i, z) in self.iter().take(limit).enumerate() {
            if self.model.d(&z.coords, &x.coords) < r {
                return Ok((i + 1, z));
            }
        }
        Err(invalid(format!("no point of the dense sequence within {r} of {x} among the first {limit}")))
    }
}

pub struct DenseIter {
    coarse: Coarse,
    fine: Fine,
    odd: bool,
    model: SpaceModel,
}

impl Iterator for DenseIter {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let raw = if self.odd { self.coarse.next() } else { self.fine.next() };
        self.odd = !self.odd;
        let mut c = raw;
        match self.model.kind {
            ModelKind::HalfSpace => {
                let last = self.model.dim - 1;
                c[last] = c[last].abs();
            }
            ModelKind::Hyperboloid2 => c = polar_to_ambient(c[0], c[1]),
            _ => {}
        }
        Some(Point::new(c))
    }
}

fn polar_to_ambient(radius: f64, angle: f64) -> Vec<f64> {
    let s = radius.sinh();
    let (x, y) = (s * angle.cos(), s * angle.sin());
    vec![x, y, (1.0 + x * x + y * y).sqrt()]
}

const HYP_RING_CAP: f64 = 30.0;

/// Integer lattice by sup-norm shells, or integer-radius rings.
struct Coarse {
    hyperbolic: bool,
    dim: usize,
    shell: i64,
    buf: VecDeque<Vec<f64>>,
}

impl Coarse {
    fn new(model: &SpaceModel) -> Self {
        Coarse { hyperbolic: model.kind == ModelKind::Hyperboloid2, dim: model.dim, shell: 0, buf: VecDeque::new() }
    }

    fn fill(&mut self) {
        let k = self.shell;
        self.shell += 1;
        if self.hyperbolic {
            let radius = (k as f64).min(HYP_RING_CAP);
            let count = if k == 0 { 1 } else { 6 * k as usize };
            for j in 0..count {
                let a = std::f64::consts::TAU * j as f64 / count as f64;
                self.buf.push_back(vec![radius, a]);
            }
            return;
        }
        let side = (2 * k + 1) as u64;
        let total = side.pow(self.dim as u32);
        for idx in 0..total {
            let mut rest = idx;
            let mut v = Vec::with_capacity(self.dim);
            let mut on_shell = false;
            for _ in 0..self.dim {
                let c = (rest % side) as i64 - k;
                rest /= side;
                on_shell |= c.abs() == k;
                v.push(c as f64);
            }
            if on_shell {
                self.buf.push_back(v);
            }
        }
    }

    fn next(&mut self) -> Vec<f64> {
        while self.buf.is_empty() {
            self.fill();
        }
        self.buf.pop_front().unwrap()
    }
}

/// Level `L` dyadic grids: spacing `2^-L` over `[-L, L]^dim`, or polar
/// grids with radial step `2^-L` up to radius `L`.
struct Fine {
    hyperbolic: bool,
    dim: usize,
    level: u32,
    idx: u64,
    total: u64,
    ring: u64,
    ring_total: u64,
    ring_count: u64,
}

impl Fine {
    fn new(model: &SpaceModel) -> Self {
        let mut f = Fine {
            hyperbolic: model.kind == ModelKind::Hyperboloid2,
            dim: model.dim,
            level: 0,
            idx: 0,
            total: 0,
            ring: 0,
            ring_total: 0,
            ring_count: 0,
        };
        f.advance_level();
        f
    }

    fn advance_level(&mut self) {
        self.level += 1;
        self.idx = 0;
        let l = self.level as u64;
        if self.hyperbolic {
            self.ring = 1;
            self.ring_count = l << l;
            self.ring_total = self.points_on_ring(1);
        } else {
            let side = 2 * l * (1u64 << l) + 1;
            self.total = side.saturating_pow(self.dim as u32);
        }
    }

    fn ring_radius(&self, ring: u64) -> f64 {
        (ring as f64 / (1u64 << self.level) as f64).min(HYP_RING_CAP)
    }

    fn points_on_ring(&self, ring: u64) -> u64 {
        let r = self.ring_radius(ring);
        let c = std::f64::consts::TAU * r.sinh() * (1u64 << self.level) as f64;
        (c.ceil() as u64).clamp(1, 1 << 40)
    }

    fn next(&mut self) -> Vec<f64> {
        if self.hyperbolic {
            if self.idx >= self.ring_total {
                self.ring += 1;
                self.idx = 0;
                if self.ring > self.ring_count {
                    self.advance_level();
                }
                self.ring_total = self.points_on_ring(self.ring);
            }
            let a = std::f64::consts::TAU * self.idx as f64 / self.ring_total as f64;
            self.idx += 1;
            return vec![self.ring_radius(self.ring), a];
        }
        if self.idx >= self.total {
            self.advance_level();
        }
        let l = self.level as u64;
        let side = 2 * l * (1u64 << l) + 1;
        let h = 1.0 / (1u64 << l) as f64;
        let mut rest = self.idx;
        self.idx += 1;
        (0..self.dim)
            .map(|_| {
                let c = rest % side;
                rest /= side;
                -(l as f64) + c as f64 * h
            })
            .collect()
    }
}
