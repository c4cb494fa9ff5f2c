//! Genotype to phenotype development.
//!
//! A genome is a small vector of bounded integer genes. [`develop`] grows a
//! bilaterally symmetric branching tree from it (a Biomorph extended with a
//! flat stroke colour and a tapering stroke width), and [`render_svg`] turns
//! the tree into a byte-stable SVG document. Everything here is pure integer
//! arithmetic.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphError {
    #[error("malformed genome: {0}")]
    MalformedGenome(String),
    #[error("cannot render an empty drawing")]
    EmptyDrawing,
}

/// An RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub fn r(self) -> u8 {
        self.0[0]
    }
    pub fn g(self) -> u8 {
        self.0[1]
    }
    pub fn b(self) -> u8 {
        self.0[2]
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rgb({},{},{})", self.r(), self.g(), self.b())
    }
}

/// One heritable locus. The order here is the gene index used by mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gene {
    Shape(u8),
    Depth,
    Red,
    Green,
    Blue,
    Thickness,
    Price,
}

pub const GENE_COUNT: usize = 14;

impl Gene {
    pub const ALL: [Gene; GENE_COUNT] = [
        Gene::Shape(0),
        Gene::Shape(1),
        Gene::Shape(2),
        Gene::Shape(3),
        Gene::Shape(4),
        Gene::Shape(5),
        Gene::Shape(6),
        Gene::Shape(7),
        Gene::Depth,
        Gene::Red,
        Gene::Green,
        Gene::Blue,
        Gene::Thickness,
        Gene::Price,
    ];

    pub fn index(self) -> usize {
        match self {
            Gene::Shape(i) => i as usize,
            Gene::Depth => 8,
            Gene::Red => 9,
            Gene::Green => 10,
            Gene::Blue => 11,
            Gene::Thickness => 12,
            Gene::Price => 13,
        }
    }

    /// Inclusive bounds.
    pub fn bounds(self) -> (i32, i32) {
        match self {
            Gene::Shape(_) => (Genome::SHAPE_MIN, Genome::SHAPE_MAX),
            Gene::Depth => (1, Genome::MAX_DEPTH),
            Gene::Red | Gene::Green | Gene::Blue => (0, 255),
            Gene::Thickness => (1, 8),
            Gene::Price => (0, Genome::MAX_PRICE_GENE),
        }
    }

    pub fn name(self) -> String {
        match self {
            Gene::Shape(i) => format!("g{}", i + 1),
            Gene::Depth => "depth".into(),
            Gene::Red => "red".into(),
            Gene::Green => "green".into(),
            Gene::Blue => "blue".into(),
            Gene::Thickness => "thickness".into(),
            Gene::Price => "price".into(),
        }
    }
}

/// The agent's heritable code.
///
/// Serializes to the canonical form
/// `{"shape":[8 ints],"depth":d,"color":[r,g,b],"thickness":t,"price":p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGenome")]
pub struct Genome {
    shape: [i8; 8],
    depth: u8,
    color: Rgb,
    thickness: u8,
    price: u8,
}

impl Genome {
    pub const SHAPE_MIN: i32 = -9;
    pub const SHAPE_MAX: i32 = 9;
    pub const MAX_DEPTH: i32 = 8;
    pub const MAX_PRICE_GENE: i32 = 15;

    pub fn new(
        shape: [i32; 8],
        depth: i32,
        color: [i32; 3],
        thickness: i32,
        price: i32,
    ) -> Result<Self, MorphError> {
        let mut values = [0i32; GENE_COUNT];
        values[..8].copy_from_slice(&shape);
        values[8] = depth;
        values[9..12].copy_from_slice(&color);
        values[12] = thickness;
        values[13] = price;
        Self::from_values(values)
    }

    /// Builds a genome from all gene values in [`Gene::ALL`] order.
    pub fn from_values(values: [i32; GENE_COUNT]) -> Result<Self, MorphError> {
        for gene in Gene::ALL {
            let v = values[gene.index()];
            let (lo, hi) = gene.bounds();
            if v < lo || v > hi {
                return Err(MorphError::MalformedGenome(format!(
                    "gene {} = {v} outside [{lo}, {hi}]",
                    gene.name()
                )));
            }
        }
        let mut shape = [0i8; 8];
        for (s, v) in shape.iter_mut().zip(&values[..8]) {
            *s = *v as i8;
        }
        Ok(Genome {
            shape,
            depth: values[8] as u8,
            color: Rgb([values[9] as u8, values[10] as u8, values[11] as u8]),
            thickness: values[12] as u8,
            price: values[13] as u8,
        })
    }

    pub fn values(&self) -> [i32; GENE_COUNT] {
        let mut out = [0i32; GENE_COUNT];
        for gene in Gene::ALL {
            out[gene.index()] = self.get(gene);
        }
        out
    }

    pub fn get(&self, gene: Gene) -> i32 {
        match gene {
            Gene::Shape(i) => i32::from(self.shape[i as usize]),
            Gene::Depth => i32::from(self.depth),
            Gene::Red => i32::from(self.color.r()),
            Gene::Green => i32::from(self.color.g()),
            Gene::Blue => i32::from(self.color.b()),
            Gene::Thickness => i32::from(self.thickness),
            Gene::Price => i32::from(self.price),
        }
    }

    pub fn with(&self, gene: Gene, value: i32) -> Result<Self, MorphError> {
        let mut values = self.values();
        values[gene.index()] = value;
        Self::from_values(values)
    }

    pub fn shape(&self) -> [i32; 8] {
        self.shape.map(i32::from)
    }
    pub fn depth(&self) -> u32 {
        u32::from(self.depth)
    }
    pub fn color(&self) -> Rgb {
        self.color
    }
    pub fn thickness(&self) -> u32 {
        u32::from(self.thickness)
    }
    pub fn price_gene(&self) -> u32 {
        u32::from(self.price)
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, MorphError> {
        serde_json::from_str(text).map_err(|e| MorphError::MalformedGenome(e.to_string()))
    }
}

impl Default for Genome {
    fn default() -> Self {
        Genome::new([1, 2, 3, 4, 1, 2, 3, 4], 5, [0, 0, 0], 3, 0).expect("default genome in bounds")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenome {
    shape: Vec<i64>,
    depth: i64,
    color: Vec<i64>,
    thickness: i64,
    price: i64,
}

impl TryFrom<RawGenome> for Genome {
    type Error = MorphError;

    fn try_from(raw: RawGenome) -> Result<Self, Self::Error> {
        if raw.shape.len() != 8 {
            return Err(MorphError::MalformedGenome(format!(
                "shape has {} genes, expected 8",
                raw.shape.len()
            )));
        }
        if raw.color.len() != 3 {
            return Err(MorphError::MalformedGenome(format!(
                "color has {} channels, expected 3",
                raw.color.len()
            )));
        }
        let narrow = |v: i64| -> Result<i32, MorphError> {
            i32::try_from(v).map_err(|_| MorphError::MalformedGenome(format!("gene value {v} out of range")))
        };
        let mut values = [0i32; GENE_COUNT];
        for (slot, v) in values[..8].iter_mut().zip(&raw.shape) {
            *slot = narrow(*v)?;
        }
        values[8] = narrow(raw.depth)?;
        for (slot, v) in values[9..12].iter_mut().zip(&raw.color) {
            *slot = narrow(*v)?;
        }
        values[12] = narrow(raw.thickness)?;
        values[13] = narrow(raw.price)?;
        Genome::from_values(values)
    }
}

/// Applies a single +/-1 step to `gene`.
///
/// A step that would leave the gene's bounds is reflected, so the result
/// always differs from the input in exactly that gene by exactly one.
pub fn step_gene(genome: &Genome, gene: Gene, up: bool) -> Genome {
    let (lo, hi) = gene.bounds();
    let v = genome.get(gene);
    let next = match (up, v) {
        (true, v) if v < hi => v + 1,
        (true, v) => v - 1,
        (false, v) if v > lo => v - 1,
        (false, v) => v + 1,
    };
    genome.with(gene, next).expect("reflected step stays in bounds")
}

/// Draws one mutation from `rng` and applies it.
///
/// Draw protocol (two draws, always): first `rng.below(14)` selects the gene
/// by its index in [`Gene::ALL`], then `rng.coin()` picks the direction
/// (`true` is +1).
pub fn mutate(genome: &Genome, rng: &mut RandomStream) -> Genome {
    let gene = Gene::ALL[rng.below(GENE_COUNT as u64) as usize];
    let up = rng.coin();
    step_gene(genome, gene, up)
}

/// All distinct one-step neighbours of `genome`, in gene order, minus first.
pub fn mutation_fan(genome: &Genome) -> Vec<(Gene, bool, Genome)> {
    let mut out: Vec<(Gene, bool, Genome)> = Vec::with_capacity(2 * GENE_COUNT);
    for gene in Gene::ALL {
        for up in [false, true] {
            let child = step_gene(genome, gene, up);
            if !out.iter().any(|(_, _, g)| *g == child) {
                out.push((gene, up, child));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub x1: i32,
    pub y1: i32,
    pub x2: i32,
    pub y2: i32,
    pub width: u32,
    pub color: Rgb,
}

/// The developed phenotype: segments in depth-first order, minus branch first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Drawing {
    pub segments: Vec<Segment>,
}

impl Drawing {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Inclusive integer bounding box `(min_x, min_y, max_x, max_y)` of all endpoints.
    pub fn bounds(&self) -> Option<(i32, i32, i32, i32)> {
        let mut it = self
            .segments
            .iter()
            .flat_map(|s| [(s.x1, s.y1), (s.x2, s.y2)]);
        let (x0, y0) = it.next()?;
        Some(it.fold((x0, y0, x0, y0), |(ax, ay, bx, by), (x, y)| {
            (ax.min(x), ay.min(y), bx.max(x), by.max(y))
        }))
    }

    /// The same drawing reflected through the vertical axis.
    pub fn mirrored(&self) -> Drawing {
        Drawing {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    x1: -s.x1,
                    x2: -s.x2,
                    ..*s
                })
                .collect(),
        }
    }
}

/// Direction tables indexed by `dir mod 8`.
///
/// `dx` is antisymmetric and `dy` symmetric under `dir -> 8 - dir`, which is
/// what makes every phenotype bilaterally symmetric.
fn direction_tables(g: [i32; 8]) -> ([i32; 8], [i32; 8]) {
    let [g1, g2, g3, g4, g5, g6, g7, g8] = g;
    (
        [0, g1, g2, g3, 0, -g3, -g2, -g1],
        [-g4, -g5, -g6, g7, g8, g7, -g6, -g5],
    )
}

pub fn develop(genome: &Genome) -> Drawing {
    let (dx, dy) = direction_tables(genome.shape());
    let max_depth = genome.depth() as i32;
    let thickness = genome.thickness() as i32;
    let color = genome.color();
    let mut segments = Vec::with_capacity((1usize << max_depth) - 1);

    fn branch(
        x: i32,
        y: i32,
        dir: i32,
        depth: i32,
        ctx: &(&[i32; 8], &[i32; 8], i32, i32, Rgb),
        out: &mut Vec<Segment>,
    ) {
        let (dx, dy, max_depth, thickness, color) = *ctx;
        let d = dir.rem_euclid(8) as usize;
        let x2 = x + depth * dx[d];
        let y2 = y + depth * dy[d];
        let width = (thickness * depth + max_depth - 1) / max_depth;
        out.push(Segment {
            x1: x,
            y1: y,
            x2,
            y2,
            width: width as u32,
            color,
        });
        if depth > 1 {
            branch(x2, y2, dir - 1, depth - 1, ctx, out);
            branch(x2, y2, dir + 1, depth - 1, ctx, out);
        }
    }

    branch(
        0,
        0,
        0,
        max_depth,
        &(&dx, &dy, max_depth, thickness, color),
        &mut segments,
    );
    Drawing { segments }
}

/// A rendered SVG document; the bytes are the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SvgDocument(String);

impl SvgDocument {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Lowercase hex SHA-256 of the document bytes.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.0.as_bytes()))
    }
}

impl fmt::Display for SvgDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Margin added on every side of the bounding box: 5% of the larger extent,
/// rounded up, at least 1.
pub fn view_margin(width: i64, height: i64) -> i64 {
    let extent = width.max(height);
    ((extent * 5 + 99) / 100).max(1)
}

pub fn render_svg(drawing: &Drawing) -> Result<SvgDocument, MorphError> {
    let (min_x, min_y, max_x, max_y) = drawing.bounds().ok_or(MorphError::EmptyDrawing)?;
    let (w, h) = (
        i64::from(max_x) - i64::from(min_x),
        i64::from(max_y) - i64::from(min_y),
    );
    let m = view_margin(w, h);
    let mut out = String::with_capacity(64 + drawing.len() * 110);
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">",
        i64::from(min_x) - m,
        i64::from(min_y) - m,
        w + 2 * m,
        h + 2 * m
    );
    for s in &drawing.segments {
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\" stroke-linecap=\"round\"/>",
            s.x1, s.y1, s.x2, s.y2, s.color, s.width
        );
    }
    out.push_str("</svg>\n");
    Ok(SvgDocument(out))
}

/// `render_svg(develop(genome))`; total because every valid genome has depth >= 1.
pub fn phenotype_svg(genome: &Genome) -> SvgDocument {
    render_svg(&develop(genome)).expect("developed drawings are never empty")
}
