//! Grid sampling, contour extraction and plot output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::neighbors::NeighborGrid;
use crate::operators::shepard_interpolate;
use crate::particles::{ParticleSet, Vec2};

/// Per-particle quantity to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Phi,
    Omega,
    U,
    V,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Phi => "phi",
            FieldKind::Omega => "omega",
            FieldKind::U => "u",
            FieldKind::V => "v",
        }
    }

    pub fn extract(self, ps: &ParticleSet) -> Vec<f64> {
        ps.particles
            .iter()
            .map(|p| match self {
                FieldKind::Phi => p.phi,
                FieldKind::Omega => p.omega,
                FieldKind::U => p.velocity.x,
                FieldKind::V => p.velocity.y,
            })
            .collect()
    }
}

impl std::str::FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "phi" | "psi" => Ok(FieldKind::Phi),
            "omega" => Ok(FieldKind::Omega),
            "u" => Ok(FieldKind::U),
            "v" => Ok(FieldKind::V),
            other => Err(format!("unknown field `{other}` (expected phi, omega, u or v)")),
        }
    }
}

/// Node-sampled scalar field on `[0, side]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub side: f64,
    /// Row-major, `index = j * n + i` with `i` along x.
    pub values: Vec<f64>,
    /// `true` where no sample is available.
    pub mask: Vec<bool>,
}

impl GridField {
    pub fn from_fn(n: usize, side: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(n >= 2, "a grid needs at least two nodes per side");
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = node(n, side, i, j);
                values.push(f(p.x, p.y));
            }
        }
        Self {
            n,
            side,
            values,
            mask: vec![false; n * n],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        node(self.n, self.side, i, j)
    }

    pub fn spacing(&self) -> f64 {
        self.side / (self.n - 1) as f64
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.idx(i, j);
        (!self.mask[k]).then_some(self.values[k])
    }

    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// Writes `x,y,value` per node; masked nodes carry `NaN`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.values.len() * 40);
        out.push_str("x,y,value\n");
        for j in 0..self.n {
            for i in 0..self.n {
                let p = self.node(i, j);
                let v = self.get(i, j).unwrap_or(f64::NAN);
                let _ = writeln!(out, "{:e},{:e},{:e}", p.x, p.y, v);
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn node(n: usize, side: f64, i: usize, j: usize) -> Vec2 {
    let d = (n - 1) as f64;
    Vec2::new(side * i as f64 / d, side * j as f64 / d)
}

/// Shepard-interpolates a particle field onto an `n x n` node grid.
/// Nodes without particles in range are masked.
pub fn sample_to_grid(ps: &ParticleSet, field: FieldKind, n: usize, kernel: &KernelSpec) -> GridField {
    assert!(n >= 2, "a grid needs at least two nodes per side");
    let positions = ps.positions();
    let index = NeighborGrid::build(&positions, ps.side, kernel.h);
    let data = field.extract(ps);
    let samples: Vec<Option<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let x = node(n, ps.side, k % n, k / n);
            shepard_interpolate(&data, x, &index, &positions, ps, kernel)
        })
        .collect();
    let gf = GridField {
        n,
        side: ps.side,
        values: samples.iter().map(|s| s.unwrap_or(0.0)).collect(),
        mask: samples.iter().map(Option::is_none).collect(),
    };
    let masked = gf.masked_fraction();
    if masked > 0.05 {
        log::warn!("{:.1}% of grid nodes have no particle in range", 100.0 * masked);
    }
    gf
}

/// Root-mean-square difference between the Shepard reconstruction at each
/// interior particle and the particle's own value.
pub fn interpolation_noise_floor(ps: &ParticleSet, field: FieldKind, kernel: &KernelSpec) -> f64 {
    let positions = ps.positions();
    let index = NeighborGrid::build(&positions, ps.side, kernel.h);
    let data = field.extract(ps);
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, p) in ps.particles.iter().enumerate().filter(|(_, p)| !p.is_boundary()) {
        if let Some(v) = shepard_interpolate(&data, p.position, &index, &positions, ps, kernel) {
            sum += (v - data[i]).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub value: f64,
    pub label: String,
}

impl Level {
    pub fn new(value: f64, label: impl Into<String>) -> Self {
        Self {
            value,
            label: label.into(),
        }
    }
}

/// Stream-function contour values: labels `a`-`m` for the recirculating
/// core, `0`-`10` for the corner eddies.
pub const STREAM_FUNCTION_LEVELS: [(&str, f64); 24] = [
    ("a", -1.0e-10),
    ("b", -1.0e-7),
    ("c", -1.0e-5),
    ("d", -1.0e-4),
    ("e", -0.0100),
    ("f", -0.0300),
    ("g", -0.0500),
    ("h", -0.0700),
    ("i", -0.0900),
    ("j", -0.1000),
    ("k", -0.1100),
    ("l", -0.1150),
    ("m", -0.1175),
    ("0", 1.0e-8),
    ("1", 1.0e-7),
    ("2", 1.0e-6),
    ("3", 1.0e-5),
    ("4", 5.0e-5),
    ("5", 1.0e-4),
    ("6", 2.5e-4),
    ("7", 5.0e-4),
    ("8", 1.0e-3),
    ("9", 1.5e-3),
    ("10", 3.0e-3),
];

/// Vorticity contour values.
pub const VORTICITY_LEVELS: [(&str, f64); 11] = [
    ("-4", -3.0),
    ("-3", -2.0),
    ("-2", -1.0),
    ("-1", -0.5),
    ("0", 0.0),
    ("1", 0.5),
    ("2", 1.0),
    ("3", 2.0),
    ("4", 3.0),
    ("5", 4.0),
    ("6", 5.0),
];

pub fn stream_function_levels() -> Vec<Level> {
    STREAM_FUNCTION_LEVELS.iter().map(|&(l, v)| Level::new(v, l)).collect()
}

pub fn vorticity_levels() -> Vec<Level> {
    VORTICITY_LEVELS.iter().map(|&(l, v)| Level::new(v, l)).collect()
}

pub fn default_levels(field: FieldKind) -> Vec<Level> {
    match field {
        FieldKind::Phi => stream_function_levels(),
        _ => vorticity_levels(),
    }
}

/// Reads one level per line. Blank lines and `#` comments are skipped; an
/// optional second column is taken as the label.
pub fn load_levels(path: &Path) -> Result<Vec<Level>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut levels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let raw = cols.next().unwrap_or_default();
        let value: f64 = raw.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: format!("`{raw}`: {e}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "level must be finite".into(),
            });
        }
        let label = cols.next().map(str::to_string).unwrap_or_else(|| levels.len().to_string());
        levels.push(Level::new(value, label));
    }
    Ok(levels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub level: f64,
    pub label: String,
    /// Closed polylines repeat their first point at the end.
    pub polylines: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn polyline_count(&self) -> usize {
        self.contours.iter().map(|c| c.polylines.len()).sum()
    }
}

/// Cell edge identifier: horizontal edges `(i, j)-(i+1, j)` and vertical
/// edges `(i, j)-(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Segments per case, as pairs of local edges: 0 bottom, 1 right, 2 top, 3 left.
/// Corner bits: 1 bottom-left, 2 bottom-right, 4 top-right, 8 top-left.
fn case_segments(case: u8, centre_inside: bool) -> &'static [(u8, u8)] {
    match case {
        0 | 15 => &[],
        1 => &[(3, 0)],
        2 => &[(0, 1)],
        3 => &[(3, 1)],
        4 => &[(1, 2)],
        5 if centre_inside => &[(0, 1), (2, 3)],
        5 => &[(3, 0), (1, 2)],
        6 => &[(0, 2)],
        7 => &[(3, 2)],
        8 => &[(2, 3)],
        9 => &[(0, 2)],
        10 if centre_inside => &[(3, 0), (1, 2)],
        10 => &[(0, 1), (2, 3)],
        11 => &[(1, 2)],
        12 => &[(3, 1)],
        13 => &[(0, 1)],
        14 => &[(3, 0)],
        _ => unreachable!(),
    }
}

/// Extracts iso-lines at each level with marching squares and chains the
/// cell segments into polylines.
pub fn marching_squares(gf: &GridField, levels: &[Level]) -> ContourSet {
    let contours = levels
        .iter()
        .map(|level| Contour {
            level: level.value,
            label: level.label.clone(),
            polylines: contour_level(gf, level.value),
        })
        .collect();
    ContourSet { contours }
}

fn contour_level(gf: &GridField, level: f64) -> Vec<Vec<Vec2>> {
    let n = gf.n;
    let mut segments: Vec<[Edge; 2]> = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut vals = [0.0; 4];
            let mut complete = true;
            for (v, &(a, b)) in vals.iter_mut().zip(&corners) {
                match gf.get(a, b) {
                    Some(x) => *v = x,
                    None => complete = false,
                }
            }
            if !complete {
                continue;
            }
            let case = vals
                .iter()
                .enumerate()
                .fold(0u8, |acc, (bit, &v)| acc | (((v >= level) as u8) << bit));
            let centre_inside = vals.iter().sum::<f64>() / 4.0 >= level;
            let edge = |e: u8| match e {
                0 => Edge::H(i, j),
                1 => Edge::V(i + 1, j),
                2 => Edge::H(i, j + 1),
                _ => Edge::V(i, j),
            };
            for &(a, b) in case_segments(case, centre_inside) {
                segments.push([edge(a), edge(b)]);
            }
        }
    }
    chain(gf, level, &segments)
}

fn edge_point(gf: &GridField, level: f64, e: Edge) -> Vec2 {
    let ((ia, ja), (ib, jb)) = match e {
        Edge::H(i, j) => ((i, j), (i + 1, j)),
        Edge::V(i, j) => ((i, j), (i, j + 1)),
    };
    let va = gf.values[gf.idx(ia, ja)];
    let vb = gf.values[gf.idx(ib, jb)];
    let t = (level - va) / (vb - va);
    let a = gf.node(ia, ja);
    let b = gf.node(ib, jb);
    a + (b - a) * t
}

fn chain(gf: &GridField, level: f64, segments: &[[Edge; 2]]) -> Vec<Vec<Vec2>> {
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            by_edge.entry(e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let walk = |start: usize, from: Edge, used: &mut Vec<bool>| {
        let mut edges = vec![from];
        let mut seg = start;
        let mut at = from;
        loop {
            used[seg] = true;
            let [a, b] = segments[seg];
            let next = if a == at { b } else { a };
            edges.push(next);
            at = next;
            match by_edge[&at].iter().copied().find(|&s| !used[s]) {
                Some(s) => seg = s,
                None => break,
            }
        }
        edges
    };

    // open polylines first, starting from edges touched by a single segment
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        if let Some(&end) = segments[s].iter().find(|e| by_edge[*e].len() == 1) {
            let edges = walk(s, end, &mut used);
            lines.push(edges);
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let edges = walk(s, segments[s][0], &mut used);
            lines.push(edges);
        }
    }
    lines
        .into_iter()
        .map(|edges| edges.into_iter().map(|e| edge_point(gf, level, e)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub value: f64,
    pub location: Vec2,
    /// Grid node of the discrete extremum.
    pub node: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexReport {
    pub global_min: Option<Extremum>,
    pub global_max: Option<Extremum>,
    /// Strict 8-neighbor local extrema, minima first, in grid order.
    pub local: Vec<Extremum>,
}

impl VortexReport {
    pub fn maxima(&self) -> impl Iterator<Item = &Extremum> {
        self.local.iter().filter(|e| e.kind == ExtremumKind::Max)
    }

    pub fn minima(&self) -> impl Iterator<Item = &Extremum> {
        self.local.iter().filter(|e| e.kind == ExtremumKind::Min)
    }
}

/// Least-squares quadratic over the 3x3 block around `(i, j)`; returns the
/// stationary point and value when it lies inside the block.
fn refine(gf: &GridField, i: usize, j: usize) -> Option<(Vec2, f64)> {
    let mut f = [[0.0; 3]; 3];
    for (b, row) in f.iter_mut().enumerate() {
        for (a, v) in row.iter_mut().enumerate() {
            *v = gf.get(i + a - 1, j + b - 1)?;
        }
    }
    let (mut sf, mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (b, row) in f.iter().enumerate() {
        for (a, &v) in row.iter().enumerate() {
            let (x, y) = (a as f64 - 1.0, b as f64 - 1.0);
            sf += v;
            sx += x * v;
            sy += y * v;
            sxy += x * y * v;
            sxx += x * x * v;
            syy += y * y * v;
        }
    }
    // f ~ c0 + bx x + by y + dxx x^2 + exy x y + dyy y^2
    let bx = sx / 6.0;
    let by = sy / 6.0;
    let exy = sxy / 4.0;
    let normal = Matrix3::new(9.0, 6.0, 6.0, 6.0, 6.0, 4.0, 6.0, 4.0, 6.0);
    let sol = normal.lu().solve(&Vector3::new(sf, sxx, syy))?;
    let (c0, dxx, dyy) = (sol[0], sol[1], sol[2]);
    let hess = Matrix2::new(2.0 * dxx, exy, exy, 2.0 * dyy);
    let offset = hess.lu().solve(&Vec2::new(-bx, -by))?;
    if offset.x.abs() > 1.0 || offset.y.abs() > 1.0 {
        return None;
    }
    let (x, y) = (offset.x, offset.y);
    let value = c0 + bx * x + by * y + dxx * x * x + exy * x * y + dyy * y * y;
    Some((gf.node(i, j) + offset * gf.spacing(), value))
}

/// Locates the global extrema and all strict 8-neighbor local extrema.
pub fn find_vortices(gf: &GridField) -> VortexReport {
    let n = gf.n;
    let mut global_min: Option<Extremum> = None;
    let mut global_max: Option<Extremum> = None;
    for j in 0..n {
        for i in 0..n {
            let Some(v) = gf.get(i, j) else { continue };
            if global_min.as_ref().is_none_or(|e| v < e.value) {
                global_min = Some(Extremum {
                    kind: ExtremumKind::Min,
                    value: v,
                    location: gf.node(i, j),
                    node: (i, j),
                });
            }
            if global_max.as_ref().is_none_or(|e| v > e.value) {
                global_max = Some(Extremum {
                    kind: ExtremumKind::Max,
                    value: v,
                    location: gf.node(i, j),
                    node: (i, j),
                });
            }
        }
    }

    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    for j in 1..n.saturating_sub(1) {
        for i in 1..n - 1 {
            let Some(v) = gf.get(i, j) else { continue };
            let mut below = true;
            let mut above = true;
            let mut complete = true;
            for b in j - 1..=j + 1 {
                for a in i - 1..=i + 1 {
                    if (a, b) == (i, j) {
                        continue;
                    }
                    match gf.get(a, b) {
                        Some(w) => {
                            below &= v < w;
                            above &= v > w;
                        }
                        None => complete = false,
                    }
                }
            }
            if !complete || !(below || above) {
                continue;
            }
            let (location, value) = refine(gf, i, j).unwrap_or((gf.node(i, j), v));
            let e = Extremum {
                kind: if below { ExtremumKind::Min } else { ExtremumKind::Max },
                value,
                location,
                node: (i, j),
            };
            if below {
                minima.push(e);
            } else {
                maxima.push(e);
            }
        }
    }
    minima.extend(maxima);
    VortexReport {
        global_min,
        global_max,
        local: minima,
    }
}

/// Renders contours as a standalone SVG of the square `[0, side]^2`.
/// Each level becomes a labelled group; negative levels are dashed.
pub fn render_svg(cs: &ContourSet, side: f64) -> String {
    let mut out = String::new();
    out.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-0.05 -0.05 1.1 1.1\" width=\"600\" height=\"600\">\n",
    );
    out.push_str(
        "<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\" stroke=\"black\" stroke-width=\"0.004\"/>\n",
    );
    out.push_str("<g transform=\"translate(0,1) scale(1,-1)\" fill=\"none\" stroke=\"black\" stroke-width=\"0.002\">\n");
    for c in &cs.contours {
        let dash = if c.level < 0.0 {
            " stroke-dasharray=\"0.01 0.006\""
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "<g class=\"level\" data-label=\"{}\" data-level=\"{:e}\"{}>",
            xml_escape(&c.label),
            c.level,
            dash
        );
        for line in &c.polylines {
            let mut d = String::new();
            for (k, p) in line.iter().enumerate() {
                let _ = write!(
                    d,
                    "{}{:.6} {:.6}",
                    if k == 0 { "M" } else { " L" },
                    p.x / side,
                    p.y / side
                );
            }
            let _ = writeln!(out, "<path d=\"{d}\"/>");
        }
        out.push_str("</g>\n");
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn emit_contours_svg(cs: &ContourSet, side: f64, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(cs, side)).map_err(|e| Error::io(path, e))
}
