//! Building blocks: laminated microstructures on thin rectangles.
//!
//! A block of depth `d` packs its rectangle with diamonds up to generation
//! `d + 1`. Every diamond is a scaled copy of a shared template that is
//! refined into laminated rectangles, and the gaps left by the packing keep
//! the boundary gradient. Microstructures are stored hierarchically: a node
//! is either a leaf region or an instance of a shared sub-microstructure
//! under an axis-aligned map, so large blocks stay cheap.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragment::{Inclusion, SimResult};
use crate::geometry::{dyadic_diamond_packing, AxisMap, Diamond, Direction, Point, Rect, Shape, Triangle};
use crate::interfaces::{interface_jumps, EdgeJumps, Fill, Outside};
use crate::rng::Stream;
use crate::wells::{
    lamination_split, rank_one_split, BoundaryData, Family, GradientLabel, Matrix2, Normal, Variant, WellSet,
    HULL_TOL,
};

/// Long direction of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl From<Direction> for Orientation {
    fn from(d: Direction) -> Self {
        match d {
            Direction::E1 => Orientation::Horizontal,
            Direction::E2 => Orientation::Vertical,
        }
    }
}

impl Orientation {
    pub fn family(self) -> Family {
        match self {
            Orientation::Horizontal => Family::Horizontal,
            Orientation::Vertical => Family::Vertical,
        }
    }

    /// Normal of the first lamination.
    pub fn first_normal(self) -> Normal {
        match self {
            Orientation::Horizontal => Normal::E2,
            Orientation::Vertical => Normal::E1,
        }
    }

    /// `[0, 1] × [0, δ]` or `[0, δ] × [0, 1]`.
    pub fn model_rect(self, delta: f64) -> Rect {
        match self {
            Orientation::Horizontal => Rect::from_corners(0.0, 0.0, 1.0, delta),
            Orientation::Vertical => Rect::from_corners(0.0, 0.0, delta, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub shape: Shape,
    pub label: GradientLabel,
    pub matrix: Matrix2,
}

#[derive(Serialize)]
struct RegionRecord<'a> {
    shape_type: &'a str,
    coords: Vec<f64>,
    label: GradientLabel,
    matrix: [f64; 4],
}

impl Region {
    fn mapped(&self, m: &AxisMap) -> Region {
        Region { shape: self.shape.mapped(m), ..*self }
    }

    fn record(&self) -> RegionRecord<'_> {
        let coords = match &self.shape {
            Shape::Rect(r) => vec![r.x0, r.y0, r.x1, r.y1],
            Shape::Diamond(d) => vec![d.center.x, d.center.y, d.d1, d.d2],
            Shape::Triangle(t) => t.v.iter().flat_map(|p| [p.x, p.y]).collect(),
        };
        RegionRecord { shape_type: self.shape.type_name(), coords, label: self.label, matrix: self.matrix.to_array() }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Leaf(Region),
    Instance { template: Arc<Microstructure>, map: AxisMap },
}

impl Node {
    fn bbox(&self) -> Rect {
        match self {
            Node::Leaf(r) => r.shape.bbox(),
            Node::Instance { template, map } => map.rect(&template.domain),
        }
    }

    fn area(&self) -> f64 {
        match self {
            Node::Leaf(r) => r.shape.area(),
            Node::Instance { template, map } => template.summary.area * map.jacobian(),
        }
    }
}

/// Area bookkeeping of a microstructure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub area: f64,
    /// `Σ area × matrix`.
    pub weighted: Matrix2,
    pub leaves: u64,
    pub by_label: Vec<((Family, Variant), f64)>,
    pub by_matrix: Vec<(Matrix2, f64)>,
}

impl Summary {
    fn add(&mut self, other: &Summary, factor: f64) {
        self.area += other.area * factor;
        self.weighted = self.weighted + other.weighted.scale(factor);
        self.leaves += other.leaves;
        for &(k, a) in &other.by_label {
            bump(&mut self.by_label, k, a * factor);
        }
        for &(m, a) in &other.by_matrix {
            bump(&mut self.by_matrix, m, a * factor);
        }
    }

    fn add_leaf(&mut self, r: &Region) {
        let a = r.shape.area();
        self.area += a;
        self.weighted = self.weighted + r.matrix.scale(a);
        self.leaves += 1;
        bump(&mut self.by_label, (r.label.family, r.label.variant), a);
        bump(&mut self.by_matrix, r.matrix, a);
    }

    /// Area carrying labels of `family`.
    pub fn family_area(&self, family: Family) -> f64 {
        self.by_label.iter().filter(|((f, _), _)| *f == family).map(|(_, a)| a).sum()
    }

    pub fn average(&self) -> Matrix2 {
        self.weighted.scale(1.0 / self.area)
    }
}

fn bump<K: PartialEq + Copy>(v: &mut Vec<(K, f64)>, k: K, a: f64) {
    match v.iter_mut().find(|(x, _)| *x == k) {
        Some(e) => e.1 += a,
        None => v.push((k, a)),
    }
}

#[derive(Debug, Clone)]
struct Grid {
    origin: Point,
    cw: f64,
    ch: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    fn build(domain: &Rect, boxes: &[Rect]) -> Grid {
        let n = boxes.len().max(1) as f64;
        let aspect = domain.l1() / domain.l2();
        let nx = ((n * aspect).sqrt().ceil() as usize).clamp(1, 512);
        let ny = ((n / aspect).sqrt().ceil() as usize).clamp(1, 512);
        let mut g = Grid {
            origin: Point::new(domain.x0, domain.y0),
            cw: domain.l1() / nx as f64,
            ch: domain.l2() / ny as f64,
            nx,
            ny,
            offsets: vec![0; nx * ny + 1],
            items: Vec::new(),
        };
        let ranges: Vec<_> = boxes.iter().map(|b| g.cell_range(b)).collect();
        for &(i0, i1, j0, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    g.offsets[j * nx + i + 1] += 1;
                }
            }
        }
        for c in 0..nx * ny {
            g.offsets[c + 1] += g.offsets[c];
        }
        let mut fill = g.offsets.clone();
        g.items = vec![0; g.offsets[nx * ny] as usize];
        for (idx, &(i0, i1, j0, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = j * nx + i;
                    g.items[fill[c] as usize] = idx as u32;
                    fill[c] += 1;
                }
            }
        }
        g
    }

    fn index(&self, v: f64, o: f64, w: f64, n: usize) -> usize {
        let t = ((v - o) / w).floor();
        if t.is_nan() || t < 0.0 {
            0
        } else {
            (t as usize).min(n - 1)
        }
    }

    fn cell_range(&self, b: &Rect) -> (usize, usize, usize, usize) {
        // a small pad keeps points on shared cell boundaries in both cells
        let px = 1e-9 * self.cw;
        let py = 1e-9 * self.ch;
        (
            self.index(b.x0 - px, self.origin.x, self.cw, self.nx),
            self.index(b.x1 + px, self.origin.x, self.cw, self.nx),
            self.index(b.y0 - py, self.origin.y, self.ch, self.ny),
            self.index(b.y1 + py, self.origin.y, self.ch, self.ny),
        )
    }

    fn candidates(&self, p: Point) -> &[u32] {
        let i = self.index(p.x, self.origin.x, self.cw, self.nx);
        let j = self.index(p.y, self.origin.y, self.ch, self.ny);
        let c = j * self.nx + i;
        &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }
}

/// Hierarchical piecewise-constant gradient field.
#[derive(Debug, Clone)]
pub struct Microstructure {
    domain: Rect,
    depth: u32,
    nodes: Vec<Node>,
    cum_area: Vec<f64>,
    grid: Grid,
    summary: Summary,
    laminates: Vec<Rect>,
    outline: Option<Diamond>,
}

impl Microstructure {
    pub fn new(domain: Rect, depth: u32, nodes: Vec<Node>) -> Microstructure {
        let boxes: Vec<Rect> = nodes.iter().map(Node::bbox).collect();
        let grid = Grid::build(&domain, &boxes);
        let mut summary = Summary::default();
        let mut cum_area = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        for n in &nodes {
            match n {
                Node::Leaf(r) => summary.add_leaf(r),
                Node::Instance { template, map } => summary.add(&template.summary, map.jacobian()),
            }
            acc += n.area();
            cum_area.push(acc);
        }
        Microstructure { domain, depth, nodes, cum_area, grid, summary, laminates: Vec::new(), outline: None }
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn summary(&self) -> &Summary {
        &self.summary
    }

    pub fn leaf_count(&self) -> u64 {
        self.summary.leaves
    }

    /// Label and matrix at `p`, or `None` outside the support.
    pub fn locate(&self, p: Point) -> Option<(GradientLabel, Matrix2)> {
        for &i in self.grid.candidates(p) {
            match &self.nodes[i as usize] {
                Node::Leaf(r) => {
                    if r.shape.contains(p) {
                        return Some((r.label, r.matrix));
                    }
                }
                Node::Instance { template, map } => {
                    if map.rect(&template.domain).contains(p) {
                        if let Some(hit) = template.locate(map.inverse_point(p)) {
                            return Some(hit);
                        }
                    }
                }
            }
        }
        None
    }

    /// Visits every leaf in global coordinates.
    pub fn for_each_region(&self, f: &mut dyn FnMut(&Region)) {
        self.visit(&AxisMap::IDENTITY, f);
    }

    fn visit(&self, outer: &AxisMap, f: &mut dyn FnMut(&Region)) {
        for n in &self.nodes {
            match n {
                Node::Leaf(r) => f(&r.mapped(outer)),
                Node::Instance { template, map } => template.visit(&outer.compose(map), f),
            }
        }
    }

    pub fn regions(&self) -> Vec<Region> {
        let mut out = Vec::with_capacity(self.summary.leaves as usize);
        self.for_each_region(&mut |r| out.push(*r));
        out
    }

    /// Laminated rectangles (before splitting into cells) in global coordinates.
    pub fn laminate_rects(&self) -> Vec<Rect> {
        let mut out = Vec::new();
        self.collect_laminates(&AxisMap::IDENTITY, &mut out);
        out
    }

    fn collect_laminates(&self, outer: &AxisMap, out: &mut Vec<Rect>) {
        out.extend(self.laminates.iter().map(|r| outer.rect(r)));
        for n in &self.nodes {
            if let Node::Instance { template, map } = n {
                template.collect_laminates(&outer.compose(map), out);
            }
        }
    }

    /// Diamonds of the packings in global coordinates.
    pub fn diamonds(&self) -> Vec<Diamond> {
        let mut out = Vec::new();
        self.collect_diamonds(&AxisMap::IDENTITY, &mut out);
        out
    }

    fn collect_diamonds(&self, outer: &AxisMap, out: &mut Vec<Diamond>) {
        if let Some(d) = &self.outline {
            if let Shape::Diamond(m) = Shape::Diamond(*d).mapped(outer) {
                out.push(m);
            }
        }
        for n in &self.nodes {
            if let Node::Instance { template, map } = n {
                template.collect_diamonds(&outer.compose(map), out);
            }
        }
    }

    /// One JSON object per leaf.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut err = None;
        self.for_each_region(&mut |r| {
            if err.is_some() {
                return;
            }
            let res = serde_json::to_writer(&mut w, &r.record())
                .map_err(Error::from)
                .and_then(|_| w.write_all(b"\n").map_err(Error::from));
            if let Err(e) = res {
                err = Some(e);
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Checks that the leaves tile the domain: total area and a gap and
    /// overlap free interface sweep.
    pub fn check_partition(&self) -> Result<()> {
        let a = self.domain.area();
        if (self.summary.area - a).abs() > 1e-9 * a {
            return Err(Error::NonConforming(format!("leaf area {} differs from domain area {a}", self.summary.area)));
        }
        self.interface_jumps(Fill::Error, Outside::Ignore, &|m| m).map(|_| ())
    }

    /// Interface jumps of `x ↦ value(matrix at x)`.
    pub fn interface_jumps(&self, fill: Fill, outside: Outside, value: &dyn Fn(Matrix2) -> Matrix2) -> Result<EdgeJumps> {
        let mut regions = Vec::with_capacity(self.summary.leaves as usize);
        self.for_each_region(&mut |r| regions.push((r.shape, value(r.matrix))));
        interface_jumps(&regions, &self.domain, fill, outside)
    }

    /// Uniform point of the support.
    pub fn sample_point(&self, s: &mut Stream) -> Point {
        let total = *self.cum_area.last().expect("sampling an empty microstructure");
        let t = s.uniform() * total;
        let i = self.cum_area.partition_point(|&c| c <= t).min(self.nodes.len() - 1);
        match &self.nodes[i] {
            Node::Leaf(r) => sample_shape(&r.shape, s),
            Node::Instance { template, map } => map.point(template.sample_point(s)),
        }
    }
}

fn sample_shape(shape: &Shape, s: &mut Stream) -> Point {
    let (a, b) = (s.uniform(), s.uniform());
    match shape {
        Shape::Rect(r) => Point::new(r.x0 + a * r.l1(), r.y0 + b * r.l2()),
        Shape::Diamond(d) => {
            let (u, v) = (a - b, a + b - 1.0);
            Point::new(d.center.x + 0.5 * d.d1 * u, d.center.y + 0.5 * d.d2 * v)
        }
        Shape::Triangle(t) => {
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let [p, q, r] = t.v;
            Point::new(p.x + a * (q.x - p.x) + b * (r.x - p.x), p.y + a * (q.y - p.y) + b * (r.y - p.y))
        }
    }
}

/// The four well gradients of a two-level laminate with average `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaminateGradients {
    pub orientation: Orientation,
    /// First split: `m = mu g_plus + (1 - mu) g_minus`.
    pub first: crate::wells::Split,
    pub second_plus: crate::wells::Split,
    pub second_minus: crate::wells::Split,
}

impl LaminateGradients {
    pub fn new(orientation: Orientation, m: &BoundaryData, wells: &WellSet) -> Result<Self> {
        let n1 = orientation.first_normal();
        let n2 = match n1 {
            Normal::E1 => Normal::E2,
            Normal::E2 => Normal::E1,
        };
        let first = lamination_split(m.matrix(), n1, wells)?;
        let second_plus = rank_one_split(first.plus, n2, wells)?;
        let second_minus = rank_one_split(first.minus, n2, wells)?;
        Ok(LaminateGradients { orientation, first, second_plus, second_minus })
    }

    /// Cells of a laminate filling `r`, labelled with `depth`.
    fn cells(&self, r: &Rect, depth: u32, wells: &WellSet, out: &mut Vec<Node>) -> Result<()> {
        let (a, b) = split_rect(r, self.orientation.first_normal(), self.first.mu);
        let n2 = match self.orientation.first_normal() {
            Normal::E1 => Normal::E2,
            Normal::E2 => Normal::E1,
        };
        for (band, sp) in [(a, &self.second_plus), (b, &self.second_minus)] {
            let (c, d) = split_rect(&band, n2, sp.mu);
            for (cell, g) in [(c, sp.plus), (d, sp.minus)] {
                let well = wells
                    .well_of(g, HULL_TOL)
                    .ok_or_else(|| Error::DegenerateSplit("laminate cell is not in a well".into()))?;
                out.push(Node::Leaf(Region {
                    shape: Shape::Rect(cell),
                    label: GradientLabel::resolved(self.orientation.family(), well, depth),
                    matrix: g,
                }));
            }
        }
        Ok(())
    }
}

/// Cuts `r` by a line normal to `n`; the first part has fraction `f`.
fn split_rect(r: &Rect, n: Normal, f: f64) -> (Rect, Rect) {
    match n {
        Normal::E2 => {
            let y = r.y0 + f * r.l2();
            (Rect::from_corners(r.x0, r.y0, r.x1, y), Rect::from_corners(r.x0, y, r.x1, r.y1))
        }
        Normal::E1 => {
            let x = r.x0 + f * r.l1();
            (Rect::from_corners(r.x0, r.y0, x, r.y1), Rect::from_corners(x, r.y0, r.x1, r.y1))
        }
    }
}

/// Right triangle with legs `a` along x and `b` along y from the corner `c`
/// (signed lengths).
#[derive(Debug, Clone, Copy)]
struct RightTri {
    c: (f64, f64),
    a: f64,
    b: f64,
}

impl RightTri {
    fn refine(self) -> (Rect, RightTri, RightTri) {
        let (ha, hb) = (0.5 * self.a, 0.5 * self.b);
        let (x, y) = self.c;
        let rect = Rect::from_corners(x.min(x + ha), y.min(y + hb), x.max(x + ha), y.max(y + hb));
        (rect, RightTri { c: (x + ha, y), a: ha, b: hb }, RightTri { c: (x, y + hb), a: ha, b: hb })
    }

    fn triangle(self) -> Triangle {
        let (x, y) = self.c;
        Triangle::new(Point::new(x, y), Point::new(x + self.a, y), Point::new(x, y + self.b))
    }

    fn swapped(self) -> RightTri {
        RightTri { c: (self.c.1, self.c.0), a: self.b, b: self.a }
    }
}

fn swap_rect(r: &Rect) -> Rect {
    Rect::from_corners(r.y0, r.x0, r.y1, r.x1)
}

/// Laminated refinement of the diamond `|u| + |v| ≤ 1` over `generations`
/// generations. Triangles left after the last generation keep `m` and are
/// labelled unresolved at depth `generations`.
pub fn diamond_template(lam: &LaminateGradients, m: &BoundaryData, wells: &WellSet, generations: u32) -> Result<Microstructure> {
    let domain = Rect::from_corners(-1.0, -1.0, 1.0, 1.0);
    let outline = Diamond { center: Point::new(0.0, 0.0), d1: 2.0, d2: 2.0, scale_index: 0 };
    if generations == 0 {
        let leaf = Region { shape: Shape::Diamond(outline), label: GradientLabel::unresolved(0), matrix: m.matrix() };
        let mut ms = Microstructure::new(domain, 0, vec![Node::Leaf(leaf)]);
        ms.outline = Some(outline);
        return Ok(ms);
    }
    // geometry for horizontal strips; swapped afterwards for the vertical family
    let swap = lam.orientation == Orientation::Vertical;
    let mut rects = vec![(Rect::from_corners(-0.5, 0.0, 0.5, 0.5), 1), (Rect::from_corners(-0.5, -0.5, 0.5, 0.0), 1)];
    let mut tris = Vec::with_capacity(8);
    for sy in [1.0, -1.0] {
        for sx in [1.0, -1.0] {
            tris.push(RightTri { c: (0.5 * sx, 0.0), a: 0.5 * sx, b: 0.5 * sy });
            tris.push(RightTri { c: (0.0, 0.5 * sy), a: 0.5 * sx, b: 0.5 * sy });
        }
    }
    for t in 2..=generations {
        let mut next = Vec::with_capacity(tris.len() * 2);
        for tri in tris {
            let (r, a, b) = tri.refine();
            rects.push((r, t));
            next.push(a);
            next.push(b);
        }
        tris = next;
    }
    let mut nodes = Vec::with_capacity(rects.len() * 4 + tris.len());
    let mut laminates = Vec::with_capacity(rects.len());
    for (r, t) in rects {
        let r = if swap { swap_rect(&r) } else { r };
        lam.cells(&r, t, wells, &mut nodes)?;
        laminates.push(r);
    }
    for tri in tris {
        let tri = if swap { tri.swapped() } else { tri };
        nodes.push(Node::Leaf(Region {
            shape: Shape::Triangle(tri.triangle()),
            label: GradientLabel::unresolved(generations),
            matrix: m.matrix(),
        }));
    }
    let mut ms = Microstructure::new(domain, generations, nodes);
    ms.laminates = laminates;
    ms.outline = Some(outline);
    Ok(ms)
}

/// Template generations used inside each diamond of a depth-`d` block.
pub fn template_generations(depth: u32) -> u32 {
    depth + 4
}

/// Model block on [`Orientation::model_rect`].
pub fn build_block(orientation: Orientation, m: &BoundaryData, wells: &WellSet, delta: f64, depth: u32) -> Result<Microstructure> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    let rect = orientation.model_rect(delta);
    if depth == 0 {
        let leaf = Region { shape: Shape::Rect(rect), label: GradientLabel::unresolved(0), matrix: m.matrix() };
        return Ok(Microstructure::new(rect, 0, vec![Node::Leaf(leaf)]));
    }
    let lam = LaminateGradients::new(orientation, m, wells)?;
    let template = Arc::new(diamond_template(&lam, m, wells, template_generations(depth))?);
    block_from_template(rect, &template, m, depth)
}

fn block_from_template(rect: Rect, template: &Arc<Microstructure>, m: &BoundaryData, depth: u32) -> Result<Microstructure> {
    let packing = dyadic_diamond_packing(&rect, i64::from(depth) + 1)?;
    let mut nodes = Vec::with_capacity(packing.diamonds.len() + packing.gaps.len());
    for d in &packing.diamonds {
        let map = AxisMap { sx: 0.5 * d.d1, sy: 0.5 * d.d2, tx: d.center.x, ty: d.center.y };
        nodes.push(Node::Instance { template: Arc::clone(template), map });
    }
    for g in &packing.gaps {
        nodes.push(Node::Leaf(Region { shape: Shape::Triangle(*g), label: GradientLabel::unresolved(0), matrix: m.matrix() }));
    }
    Ok(Microstructure::new(rect, depth, nodes))
}

/// Model blocks of both orientations sharing one boundary datum.
#[derive(Debug)]
pub struct BlockLibrary {
    wells: WellSet,
    m: BoundaryData,
    delta: f64,
    depth: u32,
    blocks: [Arc<Microstructure>; 2],
    jumps: [OnceLock<EdgeJumps>; 2],
}

fn slot(o: Orientation) -> usize {
    match o {
        Orientation::Horizontal => 0,
        Orientation::Vertical => 1,
    }
}

impl BlockLibrary {
    pub fn new(wells: WellSet, m: BoundaryData, delta: f64, depth: u32) -> Result<Self> {
        let h = build_block(Orientation::Horizontal, &m, &wells, delta, depth)?;
        let v = build_block(Orientation::Vertical, &m, &wells, delta, depth)?;
        Ok(BlockLibrary { wells, m, delta, depth, blocks: [Arc::new(h), Arc::new(v)], jumps: Default::default() })
    }

    /// Library matching a simulation configuration.
    pub fn for_config(cfg: &crate::fragment::SimConfig) -> Result<Self> {
        BlockLibrary::new(cfg.wells()?, cfg.boundary_data()?, cfg.delta, cfg.block_depth)
    }

    pub fn wells(&self) -> &WellSet {
        &self.wells
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn block(&self, o: Orientation) -> &Arc<Microstructure> {
        &self.blocks[slot(o)]
    }

    /// Interface jumps of `M - m(x)` on the model block, extended by zero.
    pub fn zero_extended_jumps(&self, o: Orientation) -> &EdgeJumps {
        self.jumps[slot(o)].get_or_init(|| {
            let m = self.m.matrix();
            self.block(o)
                .interface_jumps(Fill::Zero, Outside::Zero, &|g| m - g)
                .expect("model blocks are conforming")
        })
    }

    /// `n_copies` similar copies of the model block tiling `target` along its long side.
    pub fn instantiate(&self, o: Orientation, target: &Rect, n_copies: u32) -> Result<Microstructure> {
        if n_copies == 0 {
            return Err(Error::InvalidParameter("n_copies must be positive".into()));
        }
        let (long, short) = match o {
            Orientation::Horizontal => (target.l1(), target.l2()),
            Orientation::Vertical => (target.l2(), target.l1()),
        };
        let lambda = short / self.delta;
        if (long - f64::from(n_copies) * lambda).abs() > 1e-9 * long.max(1.0) {
            return Err(Error::InvalidPlacement(format!(
                "target {long} x {short} does not hold {n_copies} copies of a block with aspect {}",
                self.delta
            )));
        }
        Ok(Microstructure::new(*target, self.depth, self.copy_nodes(o, target, n_copies)))
    }

    /// The model block mapped anisotropically onto `target`.
    pub fn instantiate_stretched(&self, o: Orientation, target: &Rect) -> Microstructure {
        Microstructure::new(*target, self.depth, self.copy_nodes(o, target, 1))
    }

    fn copy_nodes(&self, o: Orientation, target: &Rect, n: u32) -> Vec<Node> {
        let model = self.block(o);
        (0..n)
            .map(|i| {
                let (f0, f1) = (f64::from(i) / f64::from(n), f64::from(i + 1) / f64::from(n));
                let copy = match o {
                    Orientation::Horizontal => {
                        Rect::from_corners(target.x0 + f0 * target.l1(), target.y0, target.x0 + f1 * target.l1(), target.y1)
                    }
                    Orientation::Vertical => {
                        Rect::from_corners(target.x0, target.y0 + f0 * target.l2(), target.x1, target.y0 + f1 * target.l2())
                    }
                };
                Node::Instance { template: Arc::clone(model), map: AxisMap::between(model.domain(), &copy) }
            })
            .collect()
    }

    /// Nodes realizing an inclusion of a simulation.
    pub fn inclusion_nodes(&self, inc: &Inclusion) -> Vec<Node> {
        self.copy_nodes(inc.orientation.into(), &inc.rect, inc.n_copies)
    }

    /// Upper bound on the interface jumps of `M - m` over one inclusion.
    pub fn inclusion_jumps(&self, inc: &Inclusion) -> f64 {
        let o: Orientation = inc.orientation.into();
        self.copy_nodes(o, &inc.rect, inc.n_copies)
            .iter()
            .map(|n| match n {
                Node::Instance { map, .. } => self.zero_extended_jumps(o).mapped(map),
                Node::Leaf(_) => 0.0,
            })
            .sum()
    }

    /// Blocks placed at step `k` on the unit square; the support of the
    /// `k`-th increment of the gradient.
    pub fn step_support(&self, res: &SimResult, k: u64) -> Microstructure {
        let nodes = res.state.placed.iter().filter(|b| b.step == k).flat_map(|b| self.inclusion_nodes(&b.inclusion)).collect();
        Microstructure::new(Rect::unit(), self.depth, nodes)
    }

    /// Full gradient of a run: all placed blocks plus the remaining
    /// components, which keep the boundary gradient.
    pub fn simulation_microstructure(&self, res: &SimResult) -> Microstructure {
        let mut nodes: Vec<Node> = res.state.placed.iter().flat_map(|b| self.inclusion_nodes(&b.inclusion)).collect();
        for c in res.state.components() {
            nodes.push(Node::Leaf(Region { shape: Shape::Rect(c.rect), label: GradientLabel::unresolved(0), matrix: self.m.matrix() }));
        }
        Microstructure::new(Rect::unit(), self.depth, nodes)
    }
}

/// Long sides of the laminated rectangles of a unit-length model block
/// whose packing and templates are refined independently, as
/// `(length, count)` pairs. Diamonds of equal size are grouped, so deep
/// refinements stay cheap.
pub fn inner_lengths(
    orientation: Orientation,
    m: &BoundaryData,
    wells: &WellSet,
    delta: f64,
    packing_generations: u32,
    template_generations: u32,
) -> Result<Vec<(f64, u64)>> {
    let lam = LaminateGradients::new(orientation, m, wells)?;
    let template = diamond_template(&lam, m, wells, template_generations)?;
    let packing = dyadic_diamond_packing(&orientation.model_rect(delta), i64::from(packing_generations))?;
    let mut sizes: Vec<((f64, f64), u64)> = Vec::new();
    for d in &packing.diamonds {
        bump_count(&mut sizes, (d.d1, d.d2));
    }
    let mut out = Vec::new();
    for ((d1, d2), n) in sizes {
        let map = AxisMap { sx: 0.5 * d1, sy: 0.5 * d2, tx: 0.0, ty: 0.0 };
        for r in &template.laminates {
            out.push((map.rect(r).long_side(), n));
        }
    }
    Ok(out)
}

fn bump_count(v: &mut Vec<((f64, f64), u64)>, k: (f64, f64)) {
    match v.iter_mut().find(|(x, _)| *x == k) {
        Some(e) => e.1 += 1,
        None => v.push((k, 1)),
    }
}

/// Unresolved area fraction of a depth-`d` block.
pub fn unresolved_fraction(depth: u32) -> f64 {
    if depth == 0 {
        return 1.0;
    }
    let gap = 0.5f64.powi(depth as i32 + 2);
    gap + (1.0 - gap) * 0.5f64.powi(template_generations(depth) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wells::make_boundary_data;

    fn lib(depth: u32) -> BlockLibrary {
        let w = WellSet::default();
        let m = make_boundary_data(Matrix2::diag(0.939, 1.064), &w).unwrap();
        BlockLibrary::new(w, m, 0.25, depth).unwrap()
    }

    #[test]
    fn average_is_boundary_data() {
        let l = lib(2);
        for o in [Orientation::Horizontal, Orientation::Vertical] {
            let s = l.block(o).summary();
            let avg = s.average();
            assert!((avg - l.boundary().matrix()).frobenius() < 1e-12, "{avg:?}");
            let unres = s.family_area(Family::Unresolved) / s.area;
            assert!((unres - unresolved_fraction(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn model_block_is_a_partition() {
        let l = lib(1);
        l.block(Orientation::Horizontal).check_partition().unwrap();
        l.block(Orientation::Vertical).check_partition().unwrap();
    }

    #[test]
    fn locate_agrees_with_flattened_regions() {
        let l = lib(1);
        let b = l.block(Orientation::Horizontal);
        let regions = b.regions();
        let mut s = Stream::new(1, crate::rng::Purpose::Calibration, 0, 0);
        for _ in 0..500 {
            let p = b.sample_point(&mut s);
            let (label, m) = b.locate(p).unwrap();
            assert!(regions.iter().any(|r| r.shape.contains(p) && r.label == label && r.matrix == m));
        }
    }

    #[test]
    fn instantiate_checks_shape() {
        let l = lib(1);
        let ok = Rect::from_corners(0.0, 0.0, 0.6, 0.05);
        assert_eq!(l.instantiate(Orientation::Horizontal, &ok, 3).unwrap().nodes().len(), 3);
        assert!(l.instantiate(Orientation::Horizontal, &ok, 2).is_err());
    }
}
