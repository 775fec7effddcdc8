use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_mesh, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{orient, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagonal {
    /// Every cell split from bottom-left to top-right.
    Right,
    /// Every cell split from bottom-right to top-left.
    Left,
}

/// Rotates `tri` so that its longest edge is opposite local vertex 0.
///
/// Rotation keeps the orientation. Ties go to the edge with the smallest
/// sorted vertex pair, so the labelling is idempotent.
pub fn label_longest_edge(vertices: &[Vec2], tri: [usize; 3]) -> [usize; 3] {
    let key = |i: usize| {
        let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let l = (vertices[a] - vertices[b]).norm();
        (l, std::cmp::Reverse((a.min(b), a.max(b))))
    };
    let best = (0..3)
        .max_by(|&i, &j| key(i).partial_cmp(&key(j)).unwrap())
        .unwrap();
    [tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]]
}

fn grid_mesh(
    n: usize,
    points: Vec<Vec2>,
    mut right: impl FnMut(usize, usize) -> bool,
    tag: impl Fn(Vec2) -> BoundaryTag,
) -> Result<Mesh> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let pair = if right(i, j) {
                [[a, b, c], [a, c, d]]
            } else {
                [[a, b, d], [b, c, d]]
            };
            for t in pair {
                if orient(points[t[0]], points[t[1]], points[t[2]]) <= 0.0 {
                    return Err(Error::InvalidMesh("generator produced an inverted triangle".into()));
                }
                tris.push(label_longest_edge(&points, t));
            }
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    for i in 0..n {
        for e in [
            [id(i, 0), id(i + 1, 0)],
            [id(n, i), id(n, i + 1)],
            [id(i + 1, n), id(i, n)],
            [id(0, i + 1), id(0, i)],
        ] {
            let mid = (points[e[0]] + points[e[1]]) * 0.5;
            boundary.push((e, tag(mid)));
        }
    }
    build_mesh(points, tris, boundary)
}

/// Uniform `n x n` grid of the unit square, each cell split into two triangles.
pub fn structured_square(n: usize, diagonal: Diagonal, tag: impl Fn(Vec2) -> BoundaryTag) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let points = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| Vec2::new(i as f64 * h, j as f64 * h)))
        .collect();
    grid_mesh(n, points, |_, _| diagonal == Diagonal::Right, tag)
}

/// Unstructured-looking mesh of the unit square: interior grid vertices are
/// perturbed by up to `jitter * h` per coordinate and diagonals are random.
///
/// Grid lines `x = 1/2` and `y = 1/2` stay straight when `n` is even, so
/// quadrant-wise coefficients remain element-aligned.
pub fn jittered_square(n: usize, jitter: f64, seed: u64, tag: impl Fn(Vec2) -> BoundaryTag) -> Result<Mesh> {
    if n == 0 || !(0.0..0.25).contains(&jitter) {
        return Err(Error::InvalidArgument("need n > 0 and jitter in [0, 0.25)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut p = Vec2::new(i as f64 * h, j as f64 * h);
            let free_x = i != 0 && i != n && 2 * i != n;
            let free_y = j != 0 && j != n && 2 * j != n;
            let (dx, dy): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if free_x && j != 0 && j != n {
                p.x += jitter * h * dx;
            }
            if free_y && i != 0 && i != n {
                p.y += jitter * h * dy;
            }
            points.push(p);
        }
    }
    let flips: Vec<bool> = (0..n * n).map(|_| rng.gen_bool(0.5)).collect();
    grid_mesh(n, points, |i, j| flips[j * n + i], tag)
}
