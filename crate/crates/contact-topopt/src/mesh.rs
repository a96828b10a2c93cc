//! Triangle meshes on the three supported domain families, plus the mesh
//! operations the optimization loops need: vertex motion with inversion
//! detection, interior Laplacian smoothing, and a radius-ratio quality
//! measure.
//!
//! Triangles are stored counterclockwise.  Boundary edges are directed so the
//! domain lies on the left of `a -> b`; the outward normal is then the
//! tangent rotated clockwise.  Each boundary edge carries one of four tags:
//!
//! * `Dirichlet` — displacement clamped to zero,
//! * `Neumann` — surface traction applied,
//! * `Contact` — bilateral frictional contact with a rigid support
//!   (axis-aligned by construction: the normal gap is eliminated exactly),
//! * `Free` — traction-free; in shape optimization this is the part of the
//!   boundary allowed to move.

use std::fmt;
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Boundary condition tag carried by each boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Contact,
    Free,
}

impl BoundaryTag {
    pub fn letter(&self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
            BoundaryTag::Contact => 'C',
            BoundaryTag::Free => 'F',
        }
    }

    pub fn from_letter(c: char) -> Option<BoundaryTag> {
        match c {
            'D' => Some(BoundaryTag::Dirichlet),
            'N' => Some(BoundaryTag::Neumann),
            'C' => Some(BoundaryTag::Contact),
            'F' => Some(BoundaryTag::Free),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Directed boundary edge (domain on the left of `a -> b`) with its tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Triangle mesh with tagged boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

/// Signed area of the triangle `(p, q, r)` (positive when counterclockwise).
pub fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

/// Radius-ratio quality `2 r_in / R_circ` of a single triangle, in `(0, 1]`
/// (1 for equilateral, near 0 for slivers).  Non-positive for degenerate
/// input.
pub fn triangle_quality(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    let la = dist(q, r);
    let lb = dist(p, r);
    let lc = dist(p, q);
    let area = signed_area(p, q, r);
    let s = 0.5 * (la + lb + lc);
    if s <= 0.0 || la * lb * lc == 0.0 {
        return 0.0;
    }
    // r_in = area / s,  R_circ = la*lb*lc / (4*area)  =>  2 r_in / R_circ:
    8.0 * area * area / (s * la * lb * lc)
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for valid meshes).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Total mesh area (sum of triangle areas).
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Minimum triangle quality over the mesh (see [`triangle_quality`]).
    pub fn quality(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| triangle_quality(self.vertices[a], self.vertices[b], self.vertices[c]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Length of boundary edge `e`.
    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        dist(self.vertices[e.a], self.vertices[e.b])
    }

    /// Outward unit normal of boundary edge `e` (tangent rotated clockwise,
    /// valid because the domain lies on the left of `a -> b`).
    pub fn edge_outward_normal(&self, e: &BoundaryEdge) -> [f64; 2] {
        let (pa, pb) = (self.vertices[e.a], self.vertices[e.b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    /// Total length of the boundary edges carrying `tag`.
    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary.iter().filter(|e| e.tag == tag).map(|e| self.edge_length(e)).sum()
    }

    /// Longest edge over all triangles.
    pub fn h_max(&self) -> f64 {
        let mut h: f64 = 0.0;
        for &[a, b, c] in &self.triangles {
            h = h
                .max(dist(self.vertices[a], self.vertices[b]))
                .max(dist(self.vertices[b], self.vertices[c]))
                .max(dist(self.vertices[c], self.vertices[a]));
        }
        h
    }

    /// Per-vertex mask: true when the vertex lies on a boundary edge with one
    /// of the given tags.
    pub fn tagged_vertex_mask(&self, tags: &[BoundaryTag]) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary {
            if tags.contains(&e.tag) {
                mask[e.a] = true;
                mask[e.b] = true;
            }
        }
        mask
    }

    /// Per-vertex mask of all boundary vertices.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary {
            mask[e.a] = true;
            mask[e.b] = true;
        }
        mask
    }

    /// Undirected vertex adjacency (sorted, deduplicated).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                nbrs[u].push(v);
                nbrs[v].push(u);
            }
        }
        for list in &mut nbrs {
            list.sort_unstable();
            list.dedup();
        }
        nbrs
    }

    /// Full structural validation: index ranges, positive areas, boundary
    /// edges exactly matching the triangulation's free edges, contact edges
    /// axis-aligned.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.triangles.is_empty() {
            return Err(Error::Domain("mesh has no triangles".into()));
        }
        for (i, p) in self.vertices.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Domain(format!("vertex {i} has non-finite coordinates")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::Domain(format!("triangle {t} references vertex {v} out of range")));
                }
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::Domain(format!(
                    "triangle {t} has non-positive area {area:.3e} (must be counterclockwise)"
                )));
            }
        }
        let free = extract_boundary_edges(&self.triangles);
        if free.len() != self.boundary.len() {
            return Err(Error::Domain(format!(
                "boundary edge count {} does not match triangulation ({} free edges)",
                self.boundary.len(),
                free.len()
            )));
        }
        for e in &self.boundary {
            if e.a >= n || e.b >= n {
                return Err(Error::Domain(format!("boundary edge ({}, {}) out of range", e.a, e.b)));
            }
            if !free.contains(&(e.a, e.b)) {
                return Err(Error::Domain(format!(
                    "edge ({}, {}) is not a boundary edge of the triangulation (or is misoriented)",
                    e.a, e.b
                )));
            }
            if e.tag == BoundaryTag::Contact {
                let (pa, pb) = (self.vertices[e.a], self.vertices[e.b]);
                let len = self.edge_length(e);
                let tol = 1e-9 * len.max(1.0);
                if (pa[0] - pb[0]).abs() > tol && (pa[1] - pb[1]).abs() > tol {
                    return Err(Error::Domain(format!(
                        "contact edge ({}, {}) is not axis-aligned",
                        e.a, e.b
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.boundary {
            if !seen.insert((e.a, e.b)) {
                return Err(Error::Domain(format!("duplicate boundary edge ({}, {})", e.a, e.b)));
            }
        }
        Ok(())
    }
}

/// Directed free edges of a triangulation (edges owned by exactly one
/// triangle, oriented as in that triangle, i.e. domain on the left).
fn extract_boundary_edges(triangles: &[[usize; 3]]) -> std::collections::HashSet<(usize, usize)> {
    let mut dir = std::collections::HashSet::new();
    for &[a, b, c] in triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            dir.insert((u, v));
        }
    }
    dir.iter().filter(|&&(u, v)| !dir.contains(&(v, u))).copied().collect()
}

// ---------------------------------------------------------------------------
// Domain specification and generation
// ---------------------------------------------------------------------------

/// Geometric family of the design domain.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Axis-aligned rectangle `(0, width) x (0, height)`.
    Rectangle { width: f64, height: f64 },
    /// Square `(0, side)^2` with a circular hole strictly inside.
    SquareWithHole { side: f64, center: [f64; 2], radius: f64 },
    /// L-shape: `(0, outer)^2` minus the bottom-right block
    /// `[outer-notch, outer] x [0, notch]`.
    LShape { outer: f64, notch: f64 },
}

/// Named geometric boundary segments used when assigning tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
    /// Hole circle (square-with-hole only).
    Hole,
    /// Vertical notch face at `x = outer - notch` (L-shape only).
    InnerVertical,
    /// Horizontal notch face at `y = notch` (L-shape only).
    InnerHorizontal,
}

impl Side {
    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            "bottom" => Some(Side::Bottom),
            "top" => Some(Side::Top),
            "hole" => Some(Side::Hole),
            "inner_vertical" => Some(Side::InnerVertical),
            "inner_horizontal" => Some(Side::InnerHorizontal),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
            Side::Hole => "hole",
            Side::InnerVertical => "inner_vertical",
            Side::InnerHorizontal => "inner_horizontal",
        }
    }
}

/// One tag-assignment rule.  `span` restricts the rule to the part of the
/// side whose axis coordinate (x on horizontal sides, y on vertical ones)
/// falls inside the closed interval; `None` covers the whole side.  Rules are
/// applied in order, later rules override earlier ones; unmatched edges stay
/// `Free`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRule {
    pub side: Side,
    pub span: Option<(f64, f64)>,
    pub tag: BoundaryTag,
}

/// Complete recipe for a generated mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Target mesh size; every generated edge is at most `1.5 * h`.
    pub h: f64,
    pub rules: Vec<BoundaryRule>,
}

/// Which sides exist for a domain kind.
fn sides_of(kind: &DomainKind) -> &'static [Side] {
    match kind {
        DomainKind::Rectangle { .. } => &[Side::Left, Side::Right, Side::Bottom, Side::Top],
        DomainKind::SquareWithHole { .. } => {
            &[Side::Left, Side::Right, Side::Bottom, Side::Top, Side::Hole]
        }
        DomainKind::LShape { .. } => &[
            Side::Left,
            Side::Right,
            Side::Bottom,
            Side::Top,
            Side::InnerVertical,
            Side::InnerHorizontal,
        ],
    }
}

/// Analytic area of the domain (hole subtracted exactly).
pub fn analytic_area(kind: &DomainKind) -> f64 {
    match kind {
        DomainKind::Rectangle { width, height } => width * height,
        DomainKind::SquareWithHole { side, radius, .. } => {
            side * side - std::f64::consts::PI * radius * radius
        }
        DomainKind::LShape { outer, notch } => outer * outer - notch * notch,
    }
}

/// Area of the full design domain `D` that the structure lives in.  Unlike
/// [`analytic_area`] this counts the hole of `SquareWithHole`: the hole is a
/// void inside `D`, not a bite out of it.  Volume fractions are relative to
/// this value.
pub fn bounding_area(kind: &DomainKind) -> f64 {
    match kind {
        DomainKind::Rectangle { width, height } => width * height,
        DomainKind::SquareWithHole { side, .. } => side * side,
        DomainKind::LShape { outer, notch } => outer * outer - notch * notch,
    }
}

/// Generate a mesh for `spec`.  All triangles counterclockwise, every edge at
/// most `1.5 * spec.h`, boundary tags assigned by the rules (default `Free`).
pub fn generate(spec: &DomainSpec) -> Result<Mesh> {
    if !(spec.h > 0.0) {
        return Err(Error::Domain(format!("mesh size must be positive, got {}", spec.h)));
    }
    for rule in &spec.rules {
        if !sides_of(&spec.kind).contains(&rule.side) {
            return Err(Error::config(format!(
                "boundary rule references side '{}' which does not exist for this domain",
                rule.side.name()
            )));
        }
        if rule.side == Side::Hole && rule.span.is_some() {
            return Err(Error::Unsupported("span-restricted rules on the hole circle".into()));
        }
        if let Some((lo, hi)) = rule.span {
            if !(lo < hi) {
                return Err(Error::config(format!("empty boundary span [{lo}, {hi}]")));
            }
        }
    }
    let (vertices, triangles) = match spec.kind {
        DomainKind::Rectangle { width, height } => build_rectangle(width, height, spec.h)?,
        DomainKind::SquareWithHole { side, center, radius } => {
            build_square_with_hole(side, center, radius, spec.h)?
        }
        DomainKind::LShape { outer, notch } => build_lshape(outer, notch, spec.h)?,
    };
    let mut boundary = Vec::new();
    let mut free: Vec<(usize, usize)> = extract_boundary_edges(&triangles).into_iter().collect();
    free.sort_unstable();
    let mut rule_hits = vec![0usize; spec.rules.len()];
    for (a, b) in free {
        let side = classify_side(&spec.kind, vertices[a], vertices[b])?;
        let coord = side_coordinate(side, vertices[a], vertices[b]);
        let mut tag = BoundaryTag::Free;
        for (r, rule) in spec.rules.iter().enumerate() {
            if rule.side != side {
                continue;
            }
            let hit = match rule.span {
                None => true,
                Some((lo, hi)) => coord >= lo - 1e-9 && coord <= hi + 1e-9,
            };
            if hit {
                tag = rule.tag;
                rule_hits[r] += 1;
            }
        }
        boundary.push(BoundaryEdge { a, b, tag });
    }
    for (r, hits) in rule_hits.iter().enumerate() {
        if *hits == 0 {
            let rule = &spec.rules[r];
            return Err(Error::config(format!(
                "boundary rule {} on side '{}' matched no edges (span too narrow for h = {}?)",
                r + 1,
                rule.side.name(),
                spec.h
            )));
        }
    }
    let mesh = Mesh { vertices, triangles, boundary };
    mesh.validate()?;
    let h_cap = 1.5 * spec.h;
    if mesh.h_max() > h_cap * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "generated edge length {:.4e} exceeds 1.5*h = {h_cap:.4e}",
            mesh.h_max()
        )));
    }
    Ok(mesh)
}

/// Midpoint coordinate along the side axis (x for horizontal sides, y for
/// vertical ones; unused for the hole).
fn side_coordinate(side: Side, a: [f64; 2], b: [f64; 2]) -> f64 {
    match side {
        Side::Bottom | Side::Top | Side::InnerHorizontal => 0.5 * (a[0] + b[0]),
        Side::Left | Side::Right | Side::InnerVertical => 0.5 * (a[1] + b[1]),
        Side::Hole => 0.0,
    }
}

fn classify_side(kind: &DomainKind, a: [f64; 2], b: [f64; 2]) -> Result<Side> {
    let on = |v: f64, target: f64, scale: f64| (v - target).abs() <= 1e-9 * scale.max(1.0);
    match *kind {
        DomainKind::Rectangle { width, height } => {
            let s = width.max(height);
            if on(a[0], 0.0, s) && on(b[0], 0.0, s) {
                Ok(Side::Left)
            } else if on(a[0], width, s) && on(b[0], width, s) {
                Ok(Side::Right)
            } else if on(a[1], 0.0, s) && on(b[1], 0.0, s) {
                Ok(Side::Bottom)
            } else if on(a[1], height, s) && on(b[1], height, s) {
                Ok(Side::Top)
            } else {
                Err(Error::Domain(format!("unclassifiable boundary edge at {a:?} - {b:?}")))
            }
        }
        DomainKind::SquareWithHole { side, center, radius } => {
            if on(a[0], 0.0, side) && on(b[0], 0.0, side) {
                Ok(Side::Left)
            } else if on(a[0], side, side) && on(b[0], side, side) {
                Ok(Side::Right)
            } else if on(a[1], 0.0, side) && on(b[1], 0.0, side) {
                Ok(Side::Bottom)
            } else if on(a[1], side, side) && on(b[1], side, side) {
                Ok(Side::Top)
            } else {
                let ra = dist(a, center);
                let rb = dist(b, center);
                if (ra - radius).abs() <= 1e-6 * side && (rb - radius).abs() <= 1e-6 * side {
                    Ok(Side::Hole)
                } else {
                    Err(Error::Domain(format!("unclassifiable boundary edge at {a:?} - {b:?}")))
                }
            }
        }
        DomainKind::LShape { outer, notch } => {
            let inner_x = outer - notch;
            if on(a[0], 0.0, outer) && on(b[0], 0.0, outer) {
                Ok(Side::Left)
            } else if on(a[1], outer, outer) && on(b[1], outer, outer) {
                Ok(Side::Top)
            } else if on(a[0], outer, outer) && on(b[0], outer, outer) {
                Ok(Side::Right)
            } else if on(a[1], 0.0, outer) && on(b[1], 0.0, outer) {
                Ok(Side::Bottom)
            } else if on(a[0], inner_x, outer) && on(b[0], inner_x, outer) {
                Ok(Side::InnerVertical)
            } else if on(a[1], notch, outer) && on(b[1], notch, outer) {
                Ok(Side::InnerHorizontal)
            } else {
                Err(Error::Domain(format!("unclassifiable boundary edge at {a:?} - {b:?}")))
            }
        }
    }
}

/// Structured rectangle grid, each cell split along the same diagonal.
fn build_rectangle(width: f64, height: f64, h: f64) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Domain(format!("rectangle sides must be positive, got {width} x {height}")));
    }
    let nx = (width / h).ceil().max(1.0) as usize;
    let ny = (height / h).ceil().max(1.0) as usize;
    Ok(grid_mesh(nx, ny, |i, j| {
        [width * i as f64 / nx as f64, height * j as f64 / ny as f64]
    }, |_, _| true))
}

/// Structured grid on `(0, outer)^2` with the notch block removed.  The grid
/// must place lines exactly on the notch faces, so the cell count is bumped
/// until `notch` is an integer multiple of the cell size.
fn build_lshape(outer: f64, notch: f64, h: f64) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    if !(outer > 0.0 && notch > 0.0 && notch < outer) {
        return Err(Error::Domain(format!(
            "l-shape requires 0 < notch < outer, got outer={outer}, notch={notch}"
        )));
    }
    let n0 = (outer / h).ceil().max(2.0) as usize;
    let mut n = None;
    for cand in n0..=n0.saturating_mul(10) {
        let cells = notch * cand as f64 / outer;
        if (cells - cells.round()).abs() < 1e-9 && cells.round() >= 1.0 {
            n = Some(cand);
            break;
        }
    }
    let n = n.ok_or_else(|| {
        Error::Domain(format!(
            "cannot align a uniform grid with the notch (outer={outer}, notch={notch}, h={h})"
        ))
    })?;
    let notch_cells = (notch * n as f64 / outer).round() as usize;
    let keep = move |i: usize, j: usize| !(i >= n - notch_cells && j < notch_cells);
    Ok(grid_mesh(n, n, |i, j| [outer * i as f64 / n as f64, outer * j as f64 / n as f64], keep))
}

/// Shared structured-grid builder: `nx * ny` cells, `keep` filters cells,
/// unused vertices are dropped and indices compacted.
fn grid_mesh(
    nx: usize,
    ny: usize,
    pos: impl Fn(usize, usize) -> [f64; 2],
    keep: impl Fn(usize, usize) -> bool,
) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    let mut tris_grid = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            tris_grid.push([v00, v10, v11]);
            tris_grid.push([v00, v11, v01]);
            for v in [v00, v10, v01, v11] {
                used[v] = true;
            }
        }
    }
    let mut remap = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[id(i, j)] {
                remap[id(i, j)] = vertices.len();
                vertices.push(pos(i, j));
            }
        }
    }
    let triangles = tris_grid.iter().map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]]).collect();
    (vertices, triangles)
}

/// Radial fan between the hole circle and the outer square.
///
/// The outer boundary of each square side is subdivided uniformly; each
/// boundary point defines a ray from the hole center, whose intersection with
/// the circle is the innermost node.  Rings interpolate linearly along each
/// ray, so corners are met exactly and tangential spacing never exceeds the
/// outer subdivision length.
fn build_square_with_hole(
    side: f64,
    center: [f64; 2],
    radius: f64,
    h: f64,
) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
    if !(side > 0.0 && radius > 0.0) {
        return Err(Error::Domain("square and hole dimensions must be positive".into()));
    }
    let perp = [center[0], side - center[0], center[1], side - center[1]];
    let min_perp = perp.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_perp <= radius {
        return Err(Error::Domain(format!(
            "hole is not strictly interior: wall distance {min_perp:.4} <= radius {radius:.4}"
        )));
    }
    // Safety factor keeps ring-quad diagonals below the 1.5*h edge cap.
    let target = 1.06 * h;
    // Outer boundary points, counterclockwise starting at the origin corner.
    let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    let mut outer_pts: Vec<[f64; 2]> = Vec::new();
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let m = ((side / target).ceil() as usize).max(1);
        for t in 0..m {
            let s = t as f64 / m as f64;
            outer_pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    let m_total = outer_pts.len();
    // Ring count from the longest ray.
    let mut max_ray: f64 = 0.0;
    for p in &outer_pts {
        max_ray = max_ray.max(dist(*p, center) - radius);
    }
    let rings = ((max_ray / target).ceil() as usize).max(1);
    let mut vertices = Vec::with_capacity((rings + 1) * m_total);
    for j in 0..=rings {
        let s = j as f64 / rings as f64;
        for p in &outer_pts {
            let d = dist(*p, center);
            let ux = (p[0] - center[0]) / d;
            let uy = (p[1] - center[1]) / d;
            let rj = radius + s * (d - radius);
            if j == rings {
                vertices.push(*p); // exact outer boundary coordinates
            } else {
                vertices.push([center[0] + rj * ux, center[1] + rj * uy]);
            }
        }
    }
    let id = |j: usize, i: usize| j * m_total + (i % m_total);
    let mut triangles = Vec::with_capacity(2 * rings * m_total);
    for j in 0..rings {
        for i in 0..m_total {
            // Counterclockwise quad: inner/outer at angle i, then angle i+1.
            let (a, b, c, d) = (id(j, i), id(j + 1, i), id(j + 1, i + 1), id(j, i + 1));
            // Split along the shorter diagonal: adjacent rays differ in
            // length near the square corners, and the long diagonal of those
            // skewed quads would break the edge-length cap.
            let diag_ac = dist(vertices[a], vertices[c]);
            let diag_bd = dist(vertices[b], vertices[d]);
            let tie = (diag_ac - diag_bd).abs() <= 1e-12 * side;
            if diag_ac < diag_bd || (tie && (i + j) % 2 == 0) {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    // Orientation sanity: the construction runs counterclockwise.
    for t in &triangles {
        if signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) <= 0.0 {
            return Err(Error::Domain("ray-fan construction produced an inverted triangle".into()));
        }
    }
    Ok((vertices, triangles))
}

// ---------------------------------------------------------------------------
// Mesh motion and smoothing
// ---------------------------------------------------------------------------

/// Move every vertex by `step * velocity[v]`, preserving connectivity and
/// tags.  Fails with [`Error::StepRejected`] if any triangle would reach
/// non-positive area; the caller is expected to retry with a smaller step.
///
/// Callers must pass zero velocity on Dirichlet, Neumann and Contact
/// vertices; fixed parts of the boundary never move.
pub fn move_vertices(mesh: &Mesh, velocity: &[[f64; 2]], step: f64) -> Result<Mesh> {
    assert_eq!(velocity.len(), mesh.vertices.len(), "velocity field size mismatch");
    debug_assert!({
        let fixed = mesh.tagged_vertex_mask(&[
            BoundaryTag::Dirichlet,
            BoundaryTag::Neumann,
            BoundaryTag::Contact,
        ]);
        fixed
            .iter()
            .zip(velocity)
            .all(|(f, v)| !*f || (v[0] == 0.0 && v[1] == 0.0))
    }, "nonzero velocity on a fixed boundary vertex");
    let vertices: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .zip(velocity)
        .map(|(p, v)| [p[0] + step * v[0], p[1] + step * v[1]])
        .collect();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if !(area > 0.0) {
            return Err(Error::StepRejected { triangle: t, area });
        }
    }
    Ok(Mesh { vertices, triangles: mesh.triangles.clone(), boundary: mesh.boundary.clone() })
}

/// Laplacian smoothing of interior vertices: each interior vertex is moved to
/// the average of its 1-ring neighbors, swept `passes` times in index order.
/// A move that would make any incident triangle degenerate is reverted, so
/// the result is always a valid mesh.  Boundary vertices never move.
pub fn smooth_interior(mesh: &Mesh, passes: usize) -> Mesh {
    let mut out = mesh.clone();
    let interior: Vec<bool> = mesh.boundary_vertex_mask().iter().map(|b| !b).collect();
    let nbrs = mesh.vertex_neighbors();
    let mut incident = vec![Vec::new(); mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    for _ in 0..passes {
        for v in 0..out.vertices.len() {
            if !interior[v] || nbrs[v].is_empty() {
                continue;
            }
            let mut cx = 0.0;
            let mut cy = 0.0;
            for &u in &nbrs[v] {
                cx += out.vertices[u][0];
                cy += out.vertices[u][1];
            }
            let cand = [cx / nbrs[v].len() as f64, cy / nbrs[v].len() as f64];
            let old = out.vertices[v];
            out.vertices[v] = cand;
            let ok = incident[v].iter().all(|&t| out.triangle_area(t) > 0.0);
            if !ok {
                out.vertices[v] = old;
            }
        }
    }
    out
}

/// Equalize vertex spacing along runs of Free-tagged boundary edges.  Each
/// vertex with exactly two Free-edge neighbors (and no edge of any other tag)
/// slides along its two adjacent boundary segments toward the local
/// arc-length midpoint, half a step per pass.  Because the vertex stays on
/// the current boundary polyline the domain shape is preserved up to the
/// sliding second-order error, while triangles next to a stretched stretch of
/// boundary recover their aspect ratio.  A move that would make an incident
/// triangle degenerate is reverted; constrained and loaded boundary vertices,
/// arc endpoints and junctions never move.
pub fn smooth_free_boundary(mesh: &Mesh, passes: usize) -> Mesh {
    let n = mesh.vertices.len();
    let mut free_nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pinned = vec![false; n];
    for e in &mesh.boundary {
        if e.tag == BoundaryTag::Free {
            free_nbrs[e.a].push(e.b);
            free_nbrs[e.b].push(e.a);
        } else {
            pinned[e.a] = true;
            pinned[e.b] = true;
        }
    }
    let mut incident = vec![Vec::new(); n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    let mut out = mesh.clone();
    for _ in 0..passes {
        for v in 0..n {
            if pinned[v] || free_nbrs[v].len() != 2 {
                continue;
            }
            let p = out.vertices[free_nbrs[v][0]];
            let q = out.vertices[free_nbrs[v][1]];
            let x = out.vertices[v];
            let lp = dist(p, x);
            let lq = dist(x, q);
            // Skip genuine corners (the boundary turns by more than 60
            // degrees here): sliding would cut them off.  A resolved smooth
            // arc turns by O(h / radius) per vertex, far below the guard.
            let dot = (x[0] - p[0]) * (q[0] - x[0]) + (x[1] - p[1]) * (q[1] - x[1]);
            if dot <= 0.5 * lp * lq || lp + lq == 0.0 {
                continue;
            }
            // Arc-length midpoint of the polyline p -- x -- q, on whichever
            // of the two segments contains it.
            let s = 0.5 * (lp + lq);
            let mid = if lp >= s {
                let r = s / lp;
                [p[0] + r * (x[0] - p[0]), p[1] + r * (x[1] - p[1])]
            } else {
                let r = (s - lp) / lq;
                [x[0] + r * (q[0] - x[0]), x[1] + r * (q[1] - x[1])]
            };
            let old = out.vertices[v];
            out.vertices[v] = [0.5 * (old[0] + mid[0]), 0.5 * (old[1] + mid[1])];
            let ok = incident[v].iter().all(|&t| out.triangle_area(t) > 0.0);
            if !ok {
                out.vertices[v] = old;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Plain-text mesh interchange
// ---------------------------------------------------------------------------

/// Write the mesh in the plain-text interchange format:
///
/// ```text
/// vertices N / triangles M / boundary K
/// x y            (N rows)
/// a b c          (M rows)
/// i j TAG        (K rows, TAG in {D, N, C, F})
/// ```
pub fn write_text(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!(
        "vertices {} / triangles {} / boundary {}\n",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary.len()
    ));
    for p in &mesh.vertices {
        s.push_str(&format!("{:?} {:?}\n", p[0], p[1]));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    for e in &mesh.boundary {
        s.push_str(&format!("{} {} {}\n", e.a, e.b, e.tag.letter()));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Read a mesh written by [`write_text`], validating structure and tags.
pub fn read_text(path: &Path) -> Result<Mesh> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::config_at(1, "empty mesh file"))?;
    let counts = parse_header(header).ok_or_else(|| {
        Error::config_at(1, format!("bad header '{header}', expected 'vertices N / triangles M / boundary K'"))
    })?;
    let (nv, nt, nb) = counts;
    let mut vertices = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nt);
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nv {
        let (idx, line) = next_content_line(&mut lines, "vertex row")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::config_at(idx + 1, format!("expected 'x y', got '{line}'")));
        }
        let x = parse_f64(parts[0], idx)?;
        let y = parse_f64(parts[1], idx)?;
        vertices.push([x, y]);
    }
    for _ in 0..nt {
        let (idx, line) = next_content_line(&mut lines, "triangle row")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::config_at(idx + 1, format!("expected 'a b c', got '{line}'")));
        }
        let mut tri = [0usize; 3];
        for (k, p) in parts.iter().enumerate() {
            tri[k] = parse_usize(p, idx)?;
        }
        triangles.push(tri);
    }
    for _ in 0..nb {
        let (idx, line) = next_content_line(&mut lines, "boundary row")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::config_at(idx + 1, format!("expected 'i j TAG', got '{line}'")));
        }
        let a = parse_usize(parts[0], idx)?;
        let b = parse_usize(parts[1], idx)?;
        let tag = parts[2]
            .chars()
            .next()
            .filter(|_| parts[2].len() == 1)
            .and_then(BoundaryTag::from_letter)
            .ok_or_else(|| {
                Error::config_at(idx + 1, format!("unknown boundary tag '{}', expected D/N/C/F", parts[2]))
            })?;
        boundary.push(BoundaryEdge { a, b, tag });
    }
    let mesh = Mesh { vertices, triangles, boundary };
    mesh.validate()?;
    Ok(mesh)
}

fn parse_header(line: &str) -> Option<(usize, usize, usize)> {
    let parts: Vec<&str> = line.split('/').map(str::trim).collect();
    if parts.len() != 3 {
        return None;
    }
    let grab = |p: &str, word: &str| -> Option<usize> {
        let rest = p.strip_prefix(word)?.trim();
        rest.parse().ok()
    };
    Some((
        grab(parts[0], "vertices")?,
        grab(parts[1], "triangles")?,
        grab(parts[2], "boundary")?,
    ))
}

fn next_content_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    what: &str,
) -> Result<(usize, &'a str)> {
    for (idx, line) in lines {
        if !line.trim().is_empty() {
            return Ok((idx, line.trim()));
        }
    }
    Err(Error::config(format!("unexpected end of file while reading {what}")))
}

fn parse_f64(s: &str, line0: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::config_at(line0 + 1, format!("bad number '{s}'")))
}

fn parse_usize(s: &str, line0: usize) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::config_at(line0 + 1, format!("bad index '{s}'")))
}

/// Map a per-triangle field to vertices by area-weighted averaging of the
/// incident triangles (used to turn element sensitivities into nodal driving
/// fields).
pub fn cell_to_vertex_average(mesh: &Mesh, cell_field: &[f64]) -> Vec<f64> {
    assert_eq!(cell_field.len(), mesh.triangles.len());
    let mut weight = vec![0.0; mesh.vertices.len()];
    let mut accum = vec![0.0; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        for &v in tri {
            weight[v] += area;
            accum[v] += area * cell_field[t];
        }
    }
    accum
        .iter()
        .zip(&weight)
        .map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 })
        .collect()
}
