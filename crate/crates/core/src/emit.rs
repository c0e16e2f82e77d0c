//! Artifact writers: CSV tables, SVG heatmaps and DOT graphs.

use std::fmt::Write;

use num_complex::Complex64;

use crate::decomposition::{DecompositionGraph, PieceKind};
use crate::neck_ode::CircleEnergyProfile;

/// Sample grid over a square, row-major from the top-left cell center.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub center: Complex64,
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(center: Complex64, half_width: f64, n: usize) -> Self {
        Grid { center, half_width, n }
    }

    pub fn cell(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn point(&self, row: usize, col: usize) -> Complex64 {
        let h = self.cell();
        let x = -self.half_width + (col as f64 + 0.5) * h;
        let y = self.half_width - (row as f64 + 0.5) * h;
        self.center + Complex64::new(x, y)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.n * self.n).map(|k| self.point(k / self.n, k % self.n)).collect()
    }
}

fn csv_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// `re,im,value` rows; cells without a value leave the last column empty.
pub fn grid_csv(points: &[Complex64], values: &[f64]) -> String {
    let mut s = String::from("re,im,value\n");
    for (z, v) in points.iter().zip(values) {
        let _ = writeln!(s, "{},{},{}", csv_num(z.re), csv_num(z.im), csv_num(*v));
    }
    s
}

pub fn profile_csv(p: &CircleEnergyProfile) -> String {
    let mut s = String::from("t,f,gamma\n");
    for (k, f) in p.f.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", csv_num(p.t(k)), csv_num(*f), csv_num(f.sqrt()));
    }
    s
}

const PALETTE: [(u8, u8, u8); 8] = [
    (68, 1, 84),
    (70, 50, 126),
    (54, 92, 141),
    (39, 127, 142),
    (31, 161, 135),
    (74, 193, 109),
    (160, 218, 57),
    (253, 231, 37),
];

pub fn palette(x: f64) -> (u8, u8, u8) {
    let x = x.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let k = (x.floor() as usize).min(PALETTE.len() - 2);
    let f = x - k as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (PALETTE[k], PALETTE[k + 1]);
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const LEVELS: usize = 64;
const CELL_PX: usize = 2;

/// Static heatmap of row-major `values` on an `n x n` grid, colour scaled
/// between the finite minimum and maximum; runs of equal colour share one
/// rectangle and non-finite cells are left blank.
pub fn heatmap_svg(n: usize, values: &[f64], title: &str) -> String {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let level = |v: f64| v.is_finite().then(|| (((v - lo) / span) * (LEVELS - 1) as f64).round() as usize);
    let size = n * CELL_PX;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(title));
    for row in 0..n {
        let mut col = 0;
        while col < n {
            let start = col;
            let lv = level(values[row * n + col]);
            while col < n && level(values[row * n + col]) == lv {
                col += 1;
            }
            if let Some(l) = lv {
                let (r, g, b) = palette(l as f64 / (LEVELS - 1) as f64);
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{}" height="{CELL_PX}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                    start * CELL_PX,
                    row * CELL_PX,
                    (col - start) * CELL_PX
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn tree_name(g: &DecompositionGraph, piece: usize) -> String {
    let p = g.piece(piece);
    match p.ghost {
        Some(k) => g.ghosts()[k].id.clone(),
        None => g.tree().node(p.node).id.clone(),
    }
}

/// Bubble tree augmented by ghost bubbles; every simple neck is an edge.
pub fn tree_dot(g: &DecompositionGraph) -> String {
    let mut s = String::from("digraph bubble_tree {\n");
    for p in g.pieces().iter().filter(|p| p.kind != PieceKind::SimpleNeck) {
        let shape = if p.ghost.is_some() { "ellipse, style=dashed" } else { "ellipse" };
        let _ = writeln!(s, "  {} [shape={shape}];", dot_id(&tree_name(g, p.id)));
    }
    for p in g.pieces().iter().filter(|p| p.kind == PieceKind::SimpleNeck) {
        if let [a, b] = p.neighbors.as_slice() {
            let (up, down) = if g.piece(*a).outer == p.holes[0] { (*b, *a) } else { (*a, *b) };
            let _ = writeln!(
                s,
                "  {} -> {} [label={}];",
                dot_id(&tree_name(g, up)),
                dot_id(&tree_name(g, down)),
                dot_id(&p.label)
            );
        }
    }
    s.push_str("}\n");
    s
}

/// Adjacency of the decomposition pieces.
pub fn pieces_dot(g: &DecompositionGraph) -> String {
    let mut s = String::from("graph pieces {\n");
    for p in g.pieces() {
        let shape = match p.kind {
            PieceKind::BubbleDomain => "box",
            PieceKind::SimpleNeck => "ellipse",
            PieceKind::GhostBubbleDomain => "diamond",
        };
        let _ = writeln!(s, "  {} [shape={shape}];", dot_id(&p.label));
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(s, "  {} -- {};", dot_id(&g.piece(a).label), dot_id(&g.piece(b).label));
    }
    s.push_str("}\n");
    s
}
