//! Uniform lattices with zero Dirichlet data on a 1D interval or a masked
//! 2D bounding box.
//!
//! Only interior nodes carry unknowns. A lattice neighbour that is not an
//! interior node is a ghost with value zero.

use std::io::{self, Write};

use crate::error::{check_len, Error, Result};
use crate::exprlang::Expr;
use crate::scalar::{Real, Scalar};

/// A function of position. Points are `[x, y]`; 1D callers ignore `y`.
pub trait SpatialFn<T>: Send + Sync {
    fn at(&self, p: [T; 2]) -> T;
}

impl<T, F> SpatialFn<T> for F
where
    F: Fn([T; 2]) -> T + Send + Sync,
{
    fn at(&self, p: [T; 2]) -> T {
        self(p)
    }
}

impl<T: Real> SpatialFn<T> for Expr {
    fn at(&self, p: [T; 2]) -> T {
        self.eval(p[0], p[1])
    }
}

/// Constant spatial function.
#[derive(Debug, Clone, Copy)]
pub struct Const<T>(pub T);

impl<T: Real> SpatialFn<T> for Const<T> {
    fn at(&self, _: [T; 2]) -> T {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainDescriptor<T> {
    Interval {
        a: T,
        b: T,
    },
    /// Bounding box `[x0, x1, y0, y1]`; membership came from a predicate.
    Masked {
        bbox: [T; 4],
    },
}

#[derive(Debug, Clone)]
pub struct Grid<T> {
    dim: usize,
    spacing: [T; 2],
    /// Lattice nodes per axis including the two bounding nodes.
    shape: [usize; 2],
    origin: [T; 2],
    interior: Vec<[usize; 2]>,
    lookup: Vec<Option<usize>>,
    weights: Vec<T>,
    domain: DomainDescriptor<T>,
}

/// Lattice neighbours of an interior node: `[-x, +x, -y, +y]`.
pub type Neighbours = [Option<usize>; 4];

pub fn build_interval_grid<T: Real>(a: T, b: T, n_interior: usize) -> Result<Grid<T>> {
    if n_interior < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 interior nodes, got {n_interior}")));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidGrid(format!("interval endpoints must satisfy a < b, got ({a}, {b})")));
    }
    let h = (b - a) / T::from_usize(n_interior + 1).unwrap();
    let shape = [n_interior + 2, 1];
    let interior: Vec<[usize; 2]> = (1..=n_interior).map(|i| [i, 0]).collect();
    let mut lookup = vec![None; shape[0]];
    for (k, ij) in interior.iter().enumerate() {
        lookup[ij[0]] = Some(k);
    }
    Ok(Grid {
        dim: 1,
        spacing: [h, T::one()],
        shape,
        origin: [a, T::zero()],
        interior,
        lookup,
        weights: vec![h; n_interior],
        domain: DomainDescriptor::Interval { a, b },
    })
}

/// `nx`, `ny` count lattice columns strictly inside the box, so
/// `hx = (x1 - x0) / (nx + 1)`. Nodes on the box edges are always ghosts.
pub fn build_masked_grid_2d<T: Real>(
    bbox: [T; 4],
    nx: usize,
    ny: usize,
    inside: impl Fn(T, T) -> bool,
) -> Result<Grid<T>> {
    let [x0, x1, y0, y1] = bbox;
    if nx < 8 || ny < 8 {
        return Err(Error::InvalidGrid(format!("need nx, ny >= 8, got {nx} x {ny}")));
    }
    if !(x0 < x1 && y0 < y1) || bbox.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("degenerate bounding box".into()));
    }
    let hx = (x1 - x0) / T::from_usize(nx + 1).unwrap();
    let hy = (y1 - y0) / T::from_usize(ny + 1).unwrap();
    let shape = [nx + 2, ny + 2];
    let mut lookup = vec![None; shape[0] * shape[1]];
    let mut interior = Vec::new();
    for j in 1..=ny {
        for i in 1..=nx {
            let x = x0 + T::from_usize(i).unwrap() * hx;
            let y = y0 + T::from_usize(j).unwrap() * hy;
            if inside(x, y) {
                lookup[j * shape[0] + i] = Some(interior.len());
                interior.push([i, j]);
            }
        }
    }
    if interior.is_empty() {
        return Err(Error::InvalidGrid("predicate selects no lattice node".into()));
    }
    let n = interior.len();
    Ok(Grid {
        dim: 2,
        spacing: [hx, hy],
        shape,
        origin: [x0, y0],
        interior,
        lookup,
        weights: vec![hx * hy; n],
        domain: DomainDescriptor::Masked { bbox },
    })
}

impl<T: Real> Grid<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of interior unknowns.
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn spacing(&self) -> [T; 2] {
        self.spacing
    }

    pub fn domain(&self) -> &DomainDescriptor<T> {
        &self.domain
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn lattice_shape(&self) -> [usize; 2] {
        self.shape
    }

    fn lattice_point(&self, i: usize, j: usize) -> [T; 2] {
        [
            self.origin[0] + T::from_usize(i).unwrap() * self.spacing[0],
            self.origin[1] + T::from_usize(j).unwrap() * self.spacing[1],
        ]
    }

    /// Coordinates of every lattice node (interior, ghost and box edge), row-major.
    pub fn nodes(&self) -> Vec<[T; 2]> {
        let mut out = Vec::with_capacity(self.shape[0] * self.shape[1]);
        for j in 0..self.shape[1] {
            for i in 0..self.shape[0] {
                out.push(self.lattice_point(i, j));
            }
        }
        out
    }

    /// Coordinates of interior node `k`.
    pub fn point(&self, k: usize) -> [T; 2] {
        let [i, j] = self.interior[k];
        self.lattice_point(i, j)
    }

    pub fn points(&self) -> impl Iterator<Item = [T; 2]> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Lattice index pair of interior node `k`.
    pub fn lattice_index(&self, k: usize) -> [usize; 2] {
        self.interior[k]
    }

    /// Interior id at lattice position, `None` for ghosts.
    pub fn interior_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.shape[0] || j >= self.shape[1] {
            return None;
        }
        self.lookup[j * self.shape[0] + i]
    }

    pub fn neighbours(&self, k: usize) -> Neighbours {
        let [i, j] = self.interior[k];
        let mut out = [self.interior_at(i - 1, j), self.interior_at(i + 1, j), None, None];
        if self.dim == 2 {
            out[2] = self.interior_at(i, j - 1);
            out[3] = self.interior_at(i, j + 1);
        }
        out
    }

    /// Interior node nearest to `p`; `None` if that lattice node is a ghost
    /// or `p` is outside the bounding box.
    pub fn nearest_interior(&self, p: [T; 2]) -> Option<usize> {
        let mut idx = [0usize; 2];
        for ax in 0..self.dim {
            let s = (p[ax] - self.origin[ax]) / self.spacing[ax];
            if !s.is_finite() || s < T::zero() {
                return None;
            }
            idx[ax] = s.round().to_usize()?;
        }
        self.interior_at(idx[0], idx[1])
    }

    pub fn sample(&self, f: &(impl SpatialFn<T> + ?Sized)) -> Vec<T> {
        self.points().map(|p| f.at(p)).collect()
    }

    pub fn check(&self, len: usize) -> Result<()> {
        check_len(self.len(), len)
    }

    /// `Σ w_i f_i`.
    pub fn integrate<S: Scalar<Real = T>>(&self, f: &[S]) -> Result<S> {
        self.check(f.len())?;
        Ok(self.weights.iter().zip(f).map(|(&w, &v)| v.scale(w)).sum())
    }

    /// `Σ w_i conj(f_i) g_i`, conjugate-linear in the first slot.
    pub fn inner_product<S: Scalar<Real = T>>(&self, f: &[S], g: &[S]) -> Result<S> {
        self.check(f.len())?;
        self.check(g.len())?;
        Ok(self.inner_unchecked(f, g))
    }

    pub(crate) fn inner_unchecked<S: Scalar<Real = T>>(&self, f: &[S], g: &[S]) -> S {
        self.weights.iter().zip(f.iter().zip(g)).map(|(&w, (&a, &b))| (a.conj() * b).scale(w)).sum()
    }

    /// Discrete L² norm.
    pub fn norm<S: Scalar<Real = T>>(&self, f: &[S]) -> T {
        self.weights
            .iter()
            .zip(f)
            .map(|(&w, &v)| {
                let m = v.modulus();
                w * m * m
            })
            .sum::<T>()
            .sqrt()
    }

    /// Snapshot CSV with header `x,value` or `x,y,value`.
    pub fn write_snapshot_csv<W: Write>(&self, mut out: W, values: &[T]) -> io::Result<()> {
        if values.len() != self.len() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "field length does not match grid"));
        }
        if self.dim == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (k, v) in values.iter().enumerate() {
            let p = self.point(k);
            if self.dim == 1 {
                writeln!(out, "{},{}", p[0], v)?;
            } else {
                writeln!(out, "{},{},{}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}
