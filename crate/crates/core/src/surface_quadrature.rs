//! Boundary meshes of periodized sets inside the unit cell and the surface
//! integrals built on them.
//!
//! `n = 2` uses marching squares with the saddle cells decided by the sign of
//! `f` at the cell centre. `n = 3` splits every grid cube into the six Kuhn
//! tetrahedra sharing its main diagonal and contours each tetrahedron, which
//! needs no ambiguity table and is watertight across cubes. Vertices are
//! bisected along grid edges until the bracket collapses (`|f| ≤ 1e-10` is
//! always met), normals come from the analytic gradient at the facet
//! centroid, and every integral is a one-point centroid rule.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, pairwise_sum};
use crate::periodic_sets::PhaseFunction;
use crate::theta_kernel::ThetaKernel;

/// Grid values that are exactly zero are replaced by this before extraction.
pub const ZERO_NUDGE: f64 = 1e-12;

/// Residual tolerance that every refined vertex satisfies.
pub const VERTEX_TOLERANCE: f64 = 1e-10;

/// One flat piece of the boundary. Unused trailing coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub vertices: [[f64; 3]; 3],
    pub vertex_count: u8,
    /// Length (`n = 2`) or area (`n = 3`).
    pub measure: f64,
    pub centroid: [f64; 3],
    /// Unit exterior normal.
    pub normal: [f64; 3],
}

impl Facet {
    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices[..self.vertex_count as usize]
    }
}

/// Piecewise-linear approximation of `∂Ω ∩ [0,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetMesh {
    dimension: usize,
    resolution: usize,
    facets: Vec<Facet>,
}

impl FacetMesh {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    /// Builds a mesh from explicit facets.
    pub fn from_facets(dimension: usize, resolution: usize, facets: Vec<Facet>) -> Self {
        Self {
            dimension,
            resolution,
            facets,
        }
    }

    /// Plain-text export: a `#` header, then one facet per line as
    /// `n measure c_1 … c_n N_1 … N_n`.
    pub fn to_text(&self) -> String {
        let n = self.dimension;
        let mut out = String::new();
        out.push_str("# periso facet mesh v1\n");
        out.push_str(&format!(
            "# dimension={n} resolution={} facets={}\n",
            self.resolution,
            self.facets.len()
        ));
        let cols: Vec<String> = (1..=n)
            .map(|i| format!("c{i}"))
            .chain((1..=n).map(|i| format!("N{i}")))
            .collect();
        out.push_str(&format!("# n measure {}\n", cols.join(" ")));
        for f in &self.facets {
            out.push_str(&format!("{n} {:.17e}", f.measure));
            for v in &f.centroid[..n] {
                out.push_str(&format!(" {v:.17e}"));
            }
            for v in &f.normal[..n] {
                out.push_str(&format!(" {v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Extracts the zero level set of `f` on a `resolution^n` grid over `[0,1]^n`.
///
/// A mesh without facets means `f` has no sign change on the grid; that is
/// reported as an empty mesh rather than an error.
pub fn extract_mesh(f: &PhaseFunction, resolution: usize) -> Result<FacetMesh> {
    if resolution < 8 {
        return Err(Error::Parameter(format!("resolution {resolution} below 8")));
    }
    let facets = match f.dimension() {
        2 => marching_squares(f, resolution),
        3 => marching_tetrahedra(f, resolution),
        n => return Err(Error::UnsupportedDimension(n)),
    };
    Ok(FacetMesh {
        dimension: f.dimension(),
        resolution,
        facets,
    })
}

fn node_value(f: &PhaseFunction, x: &[f64]) -> f64 {
    let v = f.eval(x);
    if v == 0.0 {
        ZERO_NUDGE
    } else {
        v
    }
}

/// Sampled node values, indexed `i0 + (res+1) * (i1 + (res+1) * i2)`.
fn sample_grid(f: &PhaseFunction, res: usize) -> Vec<f64> {
    let n = f.dimension();
    let side = res + 1;
    let total = side.pow(n as u32);
    let h = 1.0 / res as f64;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut x = [0.0; 3];
            let mut r = idx;
            for xi in x.iter_mut().take(n) {
                *xi = (r % side) as f64 * h;
                r /= side;
            }
            node_value(f, &x[..n])
        })
        .collect()
}

/// Crossing point on the segment `a -> b`, where `a` and `b` lie on opposite
/// sides. Always called with `a` the lexicographically lower endpoint so that
/// shared edges produce identical vertices.
fn refine_edge(f: &PhaseFunction, a: [f64; 3], b: [f64; 3], a_inside: bool, n: usize) -> [f64; 3] {
    let point = |lambda: f64| {
        let mut p = [0.0; 3];
        for k in 0..n {
            p[k] = a[k] + lambda * (b[k] - a[k]);
        }
        p
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f.eval(&point(mid)[..n]);
        if v == 0.0 {
            return point(mid);
        }
        if (v >= 0.0) == a_inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(0.5 * (lo + hi))
}

fn finish_facet(
    f: &PhaseFunction,
    n: usize,
    vertices: [[f64; 3]; 3],
    count: usize,
) -> Option<Facet> {
    let mut centroid = [0.0; 3];
    for v in &vertices[..count] {
        for k in 0..n {
            centroid[k] += v[k] / count as f64;
        }
    }
    let (measure, geometric) = if count == 2 {
        let d = [
            vertices[1][0] - vertices[0][0],
            vertices[1][1] - vertices[0][1],
        ];
        let len = d[0].hypot(d[1]);
        (len, [-d[1], d[0], 0.0])
    } else {
        let u = sub(vertices[1], vertices[0]);
        let v = sub(vertices[2], vertices[0]);
        let c = cross(u, v);
        (0.5 * norm(c), c)
    };
    if measure == 0.0 {
        return None;
    }
    let mut g = [0.0; 3];
    f.gradient_into(&centroid[..n], &mut g[..n]);
    let gn = norm(g);
    let normal = if gn > 0.0 && gn.is_finite() {
        [-g[0] / gn, -g[1] / gn, -g[2] / gn]
    } else {
        // Critical point of f on the facet: fall back to the flat normal,
        // pointed towards decreasing f.
        let len = norm(geometric);
        let mut m = [geometric[0] / len, geometric[1] / len, geometric[2] / len];
        let step = 1e-6;
        let ahead: Vec<f64> = (0..n).map(|k| centroid[k] + step * m[k]).collect();
        let behind: Vec<f64> = (0..n).map(|k| centroid[k] - step * m[k]).collect();
        if f.eval(&ahead) > f.eval(&behind) {
            m = [-m[0], -m[1], -m[2]];
        }
        m
    };
    Some(Facet {
        vertices,
        vertex_count: count as u8,
        measure,
        centroid,
        normal,
    })
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn marching_squares(f: &PhaseFunction, res: usize) -> Vec<Facet> {
    let side = res + 1;
    let h = 1.0 / res as f64;
    let values = sample_grid(f, res);
    let rows: Vec<Vec<Facet>> = (0..res)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            for i in 0..res {
                // Corners counter-clockwise from the lower-left.
                let idx = [
                    i + side * j,
                    i + 1 + side * j,
                    i + 1 + side * (j + 1),
                    i + side * (j + 1),
                ];
                let pos = [
                    [i as f64 * h, j as f64 * h, 0.0],
                    [(i + 1) as f64 * h, j as f64 * h, 0.0],
                    [(i + 1) as f64 * h, (j + 1) as f64 * h, 0.0],
                    [i as f64 * h, (j + 1) as f64 * h, 0.0],
                ];
                let inside = idx.map(|k| values[k] >= 0.0);
                if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                    continue;
                }
                // Edge e joins corner e and corner (e+1) % 4.
                let mut crossing: [Option<[f64; 3]>; 4] = [None; 4];
                for (e, slot) in crossing.iter_mut().enumerate() {
                    let (p, q) = (e, (e + 1) % 4);
                    if inside[p] != inside[q] {
                        // Lower endpoint first: edges 0 and 1 run upward in
                        // index, edges 2 and 3 run downward.
                        let (a, b) = if e < 2 { (p, q) } else { (q, p) };
                        *slot = Some(refine_edge(f, pos[a], pos[b], inside[a], 2));
                    }
                }
                let mut segments: Vec<([f64; 3], [f64; 3])> = Vec::with_capacity(2);
                let present: Vec<usize> = (0..4).filter(|&e| crossing[e].is_some()).collect();
                if present.len() == 2 {
                    segments.push((crossing[present[0]].unwrap(), crossing[present[1]].unwrap()));
                } else {
                    // Saddle: corners 0 and 2 agree, 1 and 3 agree.
                    let centre = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                    let centre_inside = node_value(f, &centre) >= 0.0;
                    let c = |e: usize| crossing[e].unwrap();
                    if centre_inside == inside[0] {
                        // Diagonal 0-2 connected: cut off corners 1 and 3.
                        segments.push((c(0), c(1)));
                        segments.push((c(2), c(3)));
                    } else {
                        segments.push((c(3), c(0)));
                        segments.push((c(1), c(2)));
                    }
                }
                for (a, b) in segments {
                    if let Some(facet) = finish_facet(f, 2, [a, b, [0.0; 3]], 2) {
                        out.push(facet);
                    }
                }
            }
            out
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Corner offsets of the unit cube indexed by bits (x, y, z).
const CUBE_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The six Kuhn tetrahedra: paths 0 -> e_a -> e_a + e_b -> (1,1,1).
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn marching_tetrahedra(f: &PhaseFunction, res: usize) -> Vec<Facet> {
    let side = res + 1;
    let h = 1.0 / res as f64;
    let values = sample_grid(f, res);
    let slabs: Vec<Vec<Facet>> = (0..res)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..res {
                for i in 0..res {
                    let base = [i, j, k];
                    let mut val = [0.0; 8];
                    let mut pos = [[0.0; 3]; 8];
                    for (c, off) in CUBE_CORNERS.iter().enumerate() {
                        let g = [base[0] + off[0], base[1] + off[1], base[2] + off[2]];
                        val[c] = values[g[0] + side * (g[1] + side * g[2])];
                        pos[c] = [g[0] as f64 * h, g[1] as f64 * h, g[2] as f64 * h];
                    }
                    let inside = val.map(|v| v >= 0.0);
                    if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                        continue;
                    }
                    let mut memo = [[None; 8]; 8];
                    for tet in KUHN_TETS {
                        contour_tet(f, &tet, &pos, &inside, &mut memo, &mut out);
                    }
                }
            }
            out
        })
        .collect();
    slabs.into_iter().flatten().collect()
}

fn contour_tet(
    f: &PhaseFunction,
    tet: &[usize; 4],
    pos: &[[f64; 3]; 8],
    inside: &[bool; 8],
    memo: &mut [[Option<[f64; 3]>; 8]; 8],
    out: &mut Vec<Facet>,
) {
    // Corner order is also componentwise position order, so (lower, upper)
    // is canonical and neighbouring cubes refine shared edges identically.
    let mut edge = |a: usize, b: usize| {
        let (lo, hi) = if tet[a] < tet[b] {
            (tet[a], tet[b])
        } else {
            (tet[b], tet[a])
        };
        *memo[lo][hi].get_or_insert_with(|| refine_edge(f, pos[lo], pos[hi], inside[lo], 3))
    };
    let ins: Vec<usize> = (0..4).filter(|&v| inside[tet[v]]).collect();
    let outs: Vec<usize> = (0..4).filter(|&v| !inside[tet[v]]).collect();
    let mut push = |tri: [[f64; 3]; 3]| {
        if let Some(facet) = finish_facet(f, 3, tri, 3) {
            out.push(facet);
        }
    };
    match ins.len() {
        1 | 3 => {
            let (lone, others) = if ins.len() == 1 {
                (ins[0], &outs)
            } else {
                (outs[0], &ins)
            };
            push([
                edge(lone, others[0]),
                edge(lone, others[1]),
                edge(lone, others[2]),
            ]);
        }
        2 => {
            let (a, b) = (ins[0], ins[1]);
            let (c, d) = (outs[0], outs[1]);
            let ac = edge(a, c);
            let ad = edge(a, d);
            let bd = edge(b, d);
            let bc = edge(b, c);
            push([ac, ad, bd]);
            push([ac, bd, bc]);
        }
        _ => {}
    }
}

/// Surface integrals of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceReport {
    pub dimension: usize,
    pub resolution: usize,
    pub facet_count: usize,
    pub gaussian_perimeter: f64,
    pub lebesgue_perimeter: f64,
    pub robustness: f64,
    /// Robustness with weight 1 instead of `p_n`.
    pub lebesgue_robustness: f64,
    pub projection_integrals: Vec<f64>,
    pub multiplicity_refined_sum: Option<f64>,
}

impl SurfaceReport {
    pub fn projection_sum(&self) -> f64 {
        self.projection_integrals.iter().sum()
    }
}

/// Per-facet weights `measure · p_n(centroid)`.
fn weighted_measures(mesh: &FacetMesh, kernel: &ThetaKernel) -> Vec<f64> {
    let n = mesh.dimension;
    mesh.facets
        .par_iter()
        .map(|f| f.measure * kernel.pn(&f.centroid[..n]))
        .collect()
}

/// `1 - ‖N‖₁/√n`, clamped at zero against rounding on diagonal normals.
fn diagonal_defect(normal: &[f64]) -> f64 {
    let l1: f64 = normal.iter().map(|v| v.abs()).sum();
    (1.0 - l1 / (normal.len() as f64).sqrt()).max(0.0)
}

/// `Σ measure · p_n(centroid)`: the Gaussian surface area of `Ω`.
pub fn gaussian_perimeter(mesh: &FacetMesh, kernel: &ThetaKernel) -> f64 {
    pairwise_sum(&weighted_measures(mesh, kernel))
}

pub fn lebesgue_perimeter(mesh: &FacetMesh) -> f64 {
    let m: Vec<f64> = mesh.facets.iter().map(|f| f.measure).collect();
    pairwise_sum(&m)
}

/// `Σ measure · (1 - ‖N‖₁/√n) · p_n(centroid)`.
pub fn robustness_term(mesh: &FacetMesh, kernel: &ThetaKernel) -> f64 {
    let n = mesh.dimension;
    let w = weighted_measures(mesh, kernel);
    let terms: Vec<f64> = mesh
        .facets
        .iter()
        .zip(&w)
        .map(|(f, w)| w * diagonal_defect(&f.normal[..n]))
        .collect();
    pairwise_sum(&terms)
}

/// Robustness with Lebesgue weight.
pub fn lebesgue_robustness(mesh: &FacetMesh) -> f64 {
    let n = mesh.dimension;
    let terms: Vec<f64> = mesh
        .facets
        .iter()
        .map(|f| f.measure * diagonal_defect(&f.normal[..n]))
        .collect();
    pairwise_sum(&terms)
}

/// `∫ |⟨N, v_i⟩| p_n` for each axis `i`.
pub fn projection_integrals(mesh: &FacetMesh, kernel: &ThetaKernel) -> Vec<f64> {
    let n = mesh.dimension;
    let w = weighted_measures(mesh, kernel);
    (0..n)
        .map(|i| {
            let terms: Vec<f64> = mesh
                .facets
                .iter()
                .zip(&w)
                .map(|(f, w)| w * f.normal[i].abs())
                .collect();
            pairwise_sum(&terms)
        })
        .collect()
}

/// Crossings of `t ↦ f(x with x_i = t)` over one period, located by
/// scanning `samples` subintervals and bisecting each bracket. The scan
/// window is `[δ, 1 + δ]` with `δ = 1/(2·samples)`, which sees the same roots
/// as `[0, 1)` for an antiperiodic fiber but keeps boundary points lying on
/// the cell walls away from the window ends. Roots are reported mod 1.
pub fn fiber_crossings(f: &PhaseFunction, x: &[f64], axis: usize, samples: usize) -> Vec<f64> {
    let samples = samples.max(1);
    let offset = 0.5 / samples as f64;
    let mut p = x.to_vec();
    let mut at = |t: f64| {
        p[axis] = t;
        f.eval(&p) >= 0.0
    };
    let mut roots = Vec::new();
    let mut prev_t = offset;
    let mut prev = at(offset);
    for j in 1..=samples {
        let t = offset + j as f64 / samples as f64;
        let cur = at(t);
        if cur != prev {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if at(mid) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            roots.push(if r >= 1.0 { r - 1.0 } else { r });
        }
        prev = cur;
        prev_t = t;
    }
    roots
}

/// Number of crossings of the axis-`i` fiber through `x`, scanning the same
/// window as [`fiber_crossings`] without locating the roots.
pub fn fiber_crossing_count(f: &PhaseFunction, x: &[f64], axis: usize, samples: usize) -> usize {
    let samples = samples.max(1);
    let offset = 0.5 / samples as f64;
    let mut p = x.to_vec();
    p[axis] = offset;
    let mut prev = f.eval(&p) >= 0.0;
    let mut count = 0;
    for j in 1..=samples {
        p[axis] = offset + j as f64 / samples as f64;
        let cur = f.eval(&p) >= 0.0;
        count += usize::from(cur != prev);
        prev = cur;
    }
    count
}

/// Projection sum with each facet's axis-`i` contribution divided by the
/// number of boundary points on the axis-`i` fiber through its centroid.
pub fn multiplicity_refined_sum(
    f: &PhaseFunction,
    mesh: &FacetMesh,
    kernel: &ThetaKernel,
    fiber_samples: usize,
) -> Result<f64> {
    if fiber_samples < 64 {
        return Err(Error::Parameter(format!(
            "fiber_samples {fiber_samples} below 64"
        )));
    }
    let n = mesh.dimension;
    let terms: Vec<Result<f64>> = mesh
        .facets
        .par_iter()
        .map(|facet| {
            let c = &facet.centroid[..n];
            let weight = facet.measure * kernel.pn(c);
            let mut acc = 0.0;
            for i in 0..n {
                let m = fiber_crossing_count(f, c, i, fiber_samples);
                if m == 0 {
                    return Err(Error::EmptyFiber {
                        axis: i,
                        point: c.to_vec(),
                    });
                }
                acc += facet.normal[i].abs() / m as f64;
            }
            Ok(weight * acc)
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// All surface quantities of one mesh in a single report. The multiplicity
/// refinement is only computed when `fiber_samples` is given.
pub fn surface_report(
    f: &PhaseFunction,
    mesh: &FacetMesh,
    kernel: &ThetaKernel,
    fiber_samples: Option<usize>,
) -> Result<SurfaceReport> {
    let multiplicity_refined_sum = fiber_samples
        .map(|s| multiplicity_refined_sum(f, mesh, kernel, s))
        .transpose()?;
    Ok(SurfaceReport {
        dimension: mesh.dimension,
        resolution: mesh.resolution,
        facet_count: mesh.len(),
        gaussian_perimeter: gaussian_perimeter(mesh, kernel),
        lebesgue_perimeter: lebesgue_perimeter(mesh),
        robustness: robustness_term(mesh, kernel),
        lebesgue_robustness: lebesgue_robustness(mesh),
        projection_integrals: projection_integrals(mesh, kernel),
        multiplicity_refined_sum,
    })
}

/// Both sides of the divergence identity for the field
/// `-(p_n / (π√n)) ∇ sin(π Σ x_i)` on `Ω ∩ [0,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// `-∫_{∂Ω} (Σ N_i/√n) cos(π Σ x_i) p_n`.
    pub lhs: f64,
    /// `volume_sin + volume_correction - face_flux`.
    pub rhs: f64,
    pub gap: f64,
    /// `π√n ∫_Ω sin(π Σ x_i) p_n` (Monte Carlo).
    pub volume_sin: f64,
    /// `-∫_Ω cos(π Σ x_i) Σ_i ∂_i p_n` (Monte Carlo).
    pub volume_correction: f64,
    /// Standard error of `volume_sin + volume_correction`.
    pub volume_std_error: f64,
    /// Standard error of `volume_sin` alone.
    pub sin_std_error: f64,
    /// Outward flux of the field through the faces of the unit cube. It
    /// vanishes for `n = 2`; for `n ≥ 3` it is a nonzero constant.
    pub face_flux: f64,
    pub volume_samples: usize,
    pub seed: u64,
}

const VOLUME_BATCH: usize = 1 << 14;

/// Evaluates both sides of the divergence identity. The volume integrals are
/// seeded Monte Carlo over `[0,1]^n`; the cube-face flux uses tensor
/// Gauss–Legendre quadrature.
pub fn divergence_identity_check(
    f: &PhaseFunction,
    mesh: &FacetMesh,
    kernel: &ThetaKernel,
    volume_samples: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    if volume_samples < 100_000 {
        return Err(Error::Parameter(format!(
            "volume_samples {volume_samples} below 1e5"
        )));
    }
    let n = mesh.dimension;
    let root_n = (n as f64).sqrt();

    let lhs_terms: Vec<f64> = mesh
        .facets
        .iter()
        .map(|facet| {
            let c = &facet.centroid[..n];
            let s: f64 = c.iter().sum();
            let nsum: f64 = facet.normal[..n].iter().sum();
            -facet.measure * (nsum / root_n) * (PI * s).cos() * kernel.pn(c)
        })
        .collect();
    let lhs = pairwise_sum(&lhs_terms);

    // (Σ sin, Σ sin², Σ total, Σ total²) per batch.
    let batches = volume_samples.div_ceil(VOLUME_BATCH);
    let partials: Vec<[f64; 4]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = VOLUME_BATCH.min(volume_samples - b * VOLUME_BATCH);
            let mut acc = [0.0; 4];
            let mut x = vec![0.0; n];
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = rng.random::<f64>();
                }
                if !f.contains(&x) {
                    continue;
                }
                let s: f64 = x.iter().sum();
                let (sn, cs) = (PI * s).sin_cos();
                let sin_part = PI * root_n * sn * kernel.pn(&x);
                let total = sin_part - cs * kernel.pn_gradient_sum(&x);
                acc[0] += sin_part;
                acc[1] += sin_part * sin_part;
                acc[2] += total;
                acc[3] += total * total;
            }
            acc
        })
        .collect();
    let mut sums = [0.0; 4];
    for p in &partials {
        for k in 0..4 {
            sums[k] += p[k];
        }
    }
    let m = volume_samples as f64;
    let mean_sin = sums[0] / m;
    let mean_total = sums[2] / m;
    let se = |sum: f64, sq: f64| ((sq / m - (sum / m).powi(2)).max(0.0) / (m - 1.0)).sqrt();

    let face_flux = cube_face_flux(kernel, n);
    let rhs = mean_total - face_flux;
    Ok(DivergenceReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        volume_sin: mean_sin,
        volume_correction: mean_total - mean_sin,
        volume_std_error: se(sums[2], sums[3]),
        sin_std_error: se(sums[0], sums[1]),
        face_flux,
        volume_samples,
        seed,
    })
}

/// Outward flux through `∂[0,1]^n ∩ Ω` of `V = -(p_n/√n) cos(π Σ x_i) (1,…,1)`.
///
/// `V` flips sign under every unit shift and `Ω ∩ {x_i = 1}` is the shifted
/// complement of `Ω ∩ {x_i = 0}`, so each pair of opposite faces contributes
/// `(1/√n) ∫_{x_i = 0} p_n cos(π Σ_{j≠i} x_j)` regardless of `Ω`.
pub fn cube_face_flux(kernel: &ThetaKernel, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(64);
    let pts: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&weights)
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let dims = n - 1;
    let mut total = 0.0;
    let mut idx = vec![0usize; dims];
    loop {
        let mut weight = 1.0;
        let mut s = 0.0;
        let mut p = kernel.p1(0.0);
        for &k in &idx {
            let (x, w) = pts[k];
            weight *= w;
            s += x;
            p *= kernel.p1(x);
        }
        total += weight * p * (PI * s).cos();
        // Odometer increment.
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < pts.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    n as f64 * total / (n as f64).sqrt()
}
