//! Bubble domains, generalized neck domains, ghost bubbles and the piecewise
//! conformal weight on neck domains.

use num_complex::Complex64;
use num_traits::Zero;

use crate::bubble::{group_by_limit, concentration_points, Bubble, BubbleTree, ConcentrationPoint};
use crate::error::{Error, Result};
use crate::geometry::{smoothstep, Circle, ConformalWeight, DiskWithHoles, MetricTag};
use crate::rates::{limit_ratio_scale, limit_scale_ratio, LimitClass, RateExpr, Scale, Q};

pub const DELTA_MAX: f64 = 0.1;

/// Index grid of the validity search.
pub const SEARCH_INDICES: [f64; 9] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 200.0];

/// Open ball `B(center, radius)` as a sequence in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: RateExpr,
    pub radius: Scale,
}

impl Ball {
    pub fn new(center: RateExpr, radius: Scale) -> Self {
        Ball { center, radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PieceKind {
    BubbleDomain,
    SimpleNeck,
    GhostBubbleDomain,
}

impl PieceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PieceKind::BubbleDomain => "bubble",
            PieceKind::SimpleNeck => "neck",
            PieceKind::GhostBubbleDomain => "ghost",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DomainPiece {
    pub id: usize,
    pub label: String,
    pub kind: PieceKind,
    /// index into [`DecompositionGraph::circles`]
    pub outer: usize,
    pub holes: Vec<usize>,
    pub neighbors: Vec<usize>,
    /// tree node owning a bubble domain, or the parent bubble of the neck domain
    pub node: usize,
    pub ghost: Option<usize>,
    pub neck_domain: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct GhostBubble {
    pub id: String,
    pub center: RateExpr,
    pub sigma: Scale,
    /// locations in units of `sigma`, members are tree nodes
    pub concentration: Vec<ConcentrationPoint>,
    pub piece: usize,
    pub depth: usize,
}

/// `B(c, delta lambda_P)` minus the leaf balls `B(y_j, lambda_j / delta)`.
#[derive(Clone, Debug)]
pub struct NeckDomain {
    pub id: usize,
    pub parent: usize,
    pub center: RateExpr,
    pub outer: usize,
    pub leaves: Vec<usize>,
    pub leaf_circles: Vec<usize>,
    pub pieces: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DecompositionGraph {
    tree: BubbleTree,
    delta: f64,
    circles: Vec<Ball>,
    pieces: Vec<DomainPiece>,
    ghosts: Vec<GhostBubble>,
    neck_domains: Vec<NeckDomain>,
    edges: Vec<(usize, usize)>,
}

pub fn center_of_mass(group: &[&Bubble]) -> RateExpr {
    let sum = group.iter().fold(RateExpr::zero(), |acc, b| acc + b.center.clone());
    &sum * Q::new(1, group.len().max(1) as i64)
}

/// Leading term of twice the largest pairwise center distance.
pub fn ghost_sigma(group: &[&Bubble]) -> Result<Scale> {
    let mut best: Option<(f64, crate::rates::Rate)> = None;
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            if let Some((c, r)) = (&a.center - &b.center).leading_f64() {
                let m = c.norm();
                best = match best {
                    Some((bm, br)) if br < r || (br == r && bm >= m) => Some((bm, br)),
                    _ => Some((m, r)),
                };
            }
        }
    }
    let (m, r) = best.ok_or_else(|| {
        Error::Degenerate(group.iter().map(|b| b.id.as_str()).collect::<Vec<_>>().join(","))
    })?;
    Scale::new(2.0 * m, r)
}

fn min_pairwise(points: &[ConcentrationPoint]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a.location - b.location).norm();
            best = Some(best.map_or(d, |x: f64| x.min(d)));
        }
    }
    best
}

fn members_of<'a>(tree: &'a BubbleTree, idx: &[usize]) -> Vec<&'a Bubble> {
    idx.iter().map(|&i| tree.node(i)).collect()
}

fn sub_groups(tree: &BubbleTree, members: &[usize], c: &RateExpr, sigma: &Scale) -> Result<Vec<ConcentrationPoint>> {
    let centers: Vec<(usize, &RateExpr, &str)> = members
        .iter()
        .map(|&m| (m, &tree.node(m).center, tree.node(m).id.as_str()))
        .collect();
    group_by_limit(&centers, c, sigma)
}

fn ghost_min_distance(tree: &BubbleTree, members: &[usize], acc: &mut Option<f64>) -> Result<()> {
    if members.len() < 2 {
        return Ok(());
    }
    let group = members_of(tree, members);
    let c = center_of_mass(&group);
    let sigma = ghost_sigma(&group)?;
    let subs = sub_groups(tree, members, &c, &sigma)?;
    if let Some(d) = min_pairwise(&subs) {
        *acc = Some(acc.map_or(d, |x| x.min(d)));
    }
    for s in &subs {
        ghost_min_distance(tree, &s.members, acc)?;
    }
    Ok(())
}

/// `min(DELTA_MAX, d_min / 4)` over concentration sets at every level.
pub fn choose_delta(tree: &BubbleTree) -> Result<f64> {
    let mut d_min: Option<f64> = None;
    for node in 0..tree.len() {
        let pts = concentration_points(tree, node)?;
        if let Some(d) = min_pairwise(&pts) {
            d_min = Some(d_min.map_or(d, |x| x.min(d)));
        }
        for p in &pts {
            ghost_min_distance(tree, &p.members, &mut d_min)?;
        }
    }
    Ok(d_min.map_or(DELTA_MAX, |d| DELTA_MAX.min(d / 4.0)))
}

fn check_holes(what: &str, locs: &[Complex64], radius: f64, limit: f64) -> Result<()> {
    for (i, a) in locs.iter().enumerate() {
        if a.norm() + radius >= limit {
            return Err(Error::Containment(format!("{what}: hole {i} leaves the enclosing ball")));
        }
        for (j, b) in locs.iter().enumerate().skip(i + 1) {
            if (a - b).norm() <= 2.0 * radius {
                return Err(Error::Containment(format!("{what}: holes {i} and {j} overlap")));
            }
        }
    }
    Ok(())
}

struct Builder<'a> {
    tree: &'a BubbleTree,
    delta: f64,
    circles: Vec<Ball>,
    pieces: Vec<DomainPiece>,
    ghosts: Vec<GhostBubble>,
    neck_domains: Vec<NeckDomain>,
    edges: Vec<(usize, usize)>,
    bubble_piece: Vec<usize>,
    bubble_circle: Vec<usize>,
}

impl Builder<'_> {
    fn circle(&mut self, b: Ball) -> usize {
        self.circles.push(b);
        self.circles.len() - 1
    }

    fn piece(&mut self, label: String, kind: PieceKind, outer: usize, holes: Vec<usize>, node: usize) -> usize {
        let id = self.pieces.len();
        self.pieces.push(DomainPiece {
            id,
            label,
            kind,
            outer,
            holes,
            neighbors: Vec::new(),
            node,
            ghost: None,
            neck_domain: None,
        });
        id
    }

    fn link(&mut self, a: usize, b: usize) {
        self.edges.push((a.min(b), a.max(b)));
        self.pieces[a].neighbors.push(b);
        self.pieces[b].neighbors.push(a);
    }

    fn add_to_domain(&mut self, nd: usize, piece: usize) {
        self.pieces[piece].neck_domain = Some(nd);
        self.neck_domains[nd].pieces.push(piece);
    }

    fn bubble_domains(&mut self) -> Result<()> {
        for node in 0..self.tree.len() {
            let b = self.tree.node(node);
            let r = if node == 0 { Scale::unit() } else { b.scale.times(1.0 / self.delta) };
            let c = self.circle(Ball::new(b.center.clone(), r));
            self.bubble_circle.push(c);
            let label = format!("bubble-{}", b.id);
            let p = self.piece(label, PieceKind::BubbleDomain, c, Vec::new(), node);
            self.bubble_piece.push(p);
        }
        Ok(())
    }

    fn necks_of(&mut self, node: usize) -> Result<()> {
        let tree = self.tree;
        let b = tree.node(node);
        let pts = concentration_points(tree, node)?;
        let limit = if node == 0 { 1.0 } else { 1.0 / self.delta };
        let locs: Vec<Complex64> = pts.iter().map(|p| p.location).collect();
        check_holes(&format!("bubble domain of `{}`", b.id), &locs, self.delta, limit)?;
        for p in pts {
            let c = center_of_mass(&members_of(tree, &p.members));
            let hole = self.circle(Ball::new(c.clone(), b.scale.times(self.delta)));
            let bd = self.bubble_piece[node];
            self.pieces[bd].holes.push(hole);
            let nd = self.neck_domains.len();
            let leaf_circles = p.members.iter().map(|&m| self.bubble_circle[m]).collect();
            self.neck_domains.push(NeckDomain {
                id: nd,
                parent: node,
                center: c,
                outer: hole,
                leaves: p.members.clone(),
                leaf_circles,
                pieces: Vec::new(),
            });
            self.fill(nd, hole, bd, p.members, 0)?;
        }
        Ok(())
    }

    fn fill(&mut self, nd: usize, outer: usize, above: usize, members: Vec<usize>, depth: usize) -> Result<()> {
        let tree = self.tree;
        let parent = self.neck_domains[nd].parent;
        let outer_ball = self.circles[outer].clone();
        if let [y] = members.as_slice() {
            let leaf = tree.node(*y);
            let inner = self.bubble_circle[*y];
            let inner_r = self.circles[inner].radius;
            if limit_scale_ratio(&inner_r, &outer_ball.radius) != LimitClass::Zero
                || limit_ratio_scale(&(&leaf.center - &outer_ball.center), &outer_ball.radius) != LimitClass::Zero
            {
                return Err(Error::Containment(format!("neck around `{}` does not open up", leaf.id)));
            }
            let p = self.piece(format!("neck-{}", leaf.id), PieceKind::SimpleNeck, outer, vec![inner], parent);
            self.add_to_domain(nd, p);
            self.link(above, p);
            let bd = self.bubble_piece[*y];
            self.link(p, bd);
            return Ok(());
        }

        let group = members_of(tree, &members);
        let c = center_of_mass(&group);
        let sigma = ghost_sigma(&group)?;
        if limit_scale_ratio(&sigma, &outer_ball.radius) != LimitClass::Zero {
            return Err(Error::Containment("ghost scale does not shrink inside its neck".into()));
        }
        let gid = format!("g{}", self.ghosts.len() + 1);
        let ghost_ball = self.circle(Ball::new(c.clone(), sigma.times(2.0)));
        let neck = self.piece(format!("neck-{gid}"), PieceKind::SimpleNeck, outer, vec![ghost_ball], parent);
        self.add_to_domain(nd, neck);
        self.link(above, neck);

        let subs = sub_groups(tree, &members, &c, &sigma)?;
        if subs.len() < 2 {
            return Err(Error::Degenerate(format!("ghost {gid} has a single concentration point")));
        }
        let locs: Vec<Complex64> = subs.iter().map(|s| s.location).collect();
        check_holes(&format!("ghost {gid}"), &locs, self.delta, 2.0)?;
        let gp = self.piece(format!("ghost-{gid}"), PieceKind::GhostBubbleDomain, ghost_ball, Vec::new(), parent);
        self.add_to_domain(nd, gp);
        self.link(neck, gp);
        let g = self.ghosts.len();
        self.pieces[gp].ghost = Some(g);
        self.ghosts.push(GhostBubble {
            id: gid,
            center: c,
            sigma,
            concentration: subs.clone(),
            piece: gp,
            depth,
        });
        for s in subs {
            let sc = center_of_mass(&members_of(tree, &s.members));
            let hole = self.circle(Ball::new(sc, sigma.times(self.delta)));
            self.pieces[gp].holes.push(hole);
            self.fill(nd, hole, gp, s.members, depth + 1)?;
        }
        Ok(())
    }
}

pub fn decompose(tree: &BubbleTree, delta: f64) -> Result<DecompositionGraph> {
    if !(delta > 0.0 && delta <= DELTA_MAX) {
        return Err(Error::ParameterDomain(format!("delta = {delta} must lie in (0, {DELTA_MAX}]")));
    }
    let mut b = Builder {
        tree,
        delta,
        circles: Vec::new(),
        pieces: Vec::new(),
        ghosts: Vec::new(),
        neck_domains: Vec::new(),
        edges: Vec::new(),
        bubble_piece: Vec::new(),
        bubble_circle: Vec::new(),
    };
    b.bubble_domains()?;
    for node in 0..tree.len() {
        b.necks_of(node)?;
    }
    b.edges.sort_unstable();
    Ok(DecompositionGraph {
        tree: tree.clone(),
        delta,
        circles: b.circles,
        pieces: b.pieces,
        ghosts: b.ghosts,
        neck_domains: b.neck_domains,
        edges: b.edges,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub t: f64,
    pub passed: bool,
    pub failure: Option<String>,
    pub min_passing_t: Option<f64>,
}

/// Piece geometry at a fixed index, as offsets from the piece's outer center.
#[derive(Clone, Debug)]
pub struct PieceFrame {
    pub piece: usize,
    pub kind: PieceKind,
    pub anchor: RateExpr,
    pub t: f64,
    pub region: DiskWithHoles,
}

impl DecompositionGraph {
    pub fn tree(&self) -> &BubbleTree {
        &self.tree
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn circles(&self) -> &[Ball] {
        &self.circles
    }

    pub fn pieces(&self) -> &[DomainPiece] {
        &self.pieces
    }

    pub fn piece(&self, id: usize) -> &DomainPiece {
        &self.pieces[id]
    }

    pub fn piece_by_label(&self, label: &str) -> Option<&DomainPiece> {
        self.pieces.iter().find(|p| p.label == label)
    }

    pub fn ghosts(&self) -> &[GhostBubble] {
        &self.ghosts
    }

    pub fn neck_domains(&self) -> &[NeckDomain] {
        &self.neck_domains
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of ghost bubbles.
    pub fn m1(&self) -> usize {
        self.ghosts.len()
    }

    /// Largest number of boundary circles of a ghost piece.
    pub fn m2(&self) -> usize {
        self.ghosts.iter().map(|g| 1 + self.pieces[g.piece].holes.len()).max().unwrap_or(0)
    }

    pub fn count(&self, kind: PieceKind) -> usize {
        self.pieces.iter().filter(|p| p.kind == kind).count()
    }

    /// Pieces bounded by `circle`.
    pub fn pieces_on(&self, circle: usize) -> Vec<usize> {
        self.pieces
            .iter()
            .filter(|p| p.outer == circle || p.holes.contains(&circle))
            .map(|p| p.id)
            .collect()
    }

    fn check_at(&self, t: f64) -> Option<String> {
        for p in &self.pieces {
            let o = &self.circles[p.outer];
            let rel: Vec<(Complex64, f64)> = p
                .holes
                .iter()
                .map(|&h| {
                    let hb = &self.circles[h];
                    ((&hb.center - &o.center).evaluate_over(t, &o.radius), hb.radius.ratio_at(&o.radius, t))
                })
                .collect();
            for (i, (c, r)) in rel.iter().enumerate() {
                if !(c.norm() + r < 1.0) {
                    return Some(format!("hole {} of `{}` is not inside its outer ball", i, p.label));
                }
                for (j, (c2, r2)) in rel.iter().enumerate().skip(i + 1) {
                    if !((c - c2).norm() > r + r2) {
                        return Some(format!("holes {} and {} of `{}` overlap", i, j, p.label));
                    }
                }
            }
        }
        None
    }

    pub fn validate_at_index(&self, t: f64) -> ValidationReport {
        let failure = self.check_at(t);
        let min_passing_t = SEARCH_INDICES.iter().copied().find(|&s| self.check_at(s).is_none());
        ValidationReport { t, passed: failure.is_none(), failure, min_passing_t }
    }

    pub(crate) fn require_valid(&self, t: f64) -> Result<()> {
        match self.check_at(t) {
            None => Ok(()),
            Some(reason) => Err(Error::NotValidAtIndex { t, reason }),
        }
    }

    pub fn frame(&self, piece: usize, t: f64) -> PieceFrame {
        let p = &self.pieces[piece];
        let o = &self.circles[p.outer];
        let holes = p
            .holes
            .iter()
            .map(|&h| {
                let hb = &self.circles[h];
                Circle::new((&hb.center - &o.center).evaluate(t), hb.radius.evaluate(t))
            })
            .collect();
        PieceFrame {
            piece,
            kind: p.kind,
            anchor: o.center.clone(),
            t,
            region: DiskWithHoles { outer: Circle::new(Complex64::zero(), o.radius.evaluate(t)), holes },
        }
    }

    pub fn neck_weight(&self, frame: &PieceFrame) -> Result<NeckWeight> {
        if frame.kind != PieceKind::SimpleNeck {
            return Err(Error::KindMismatch("simple neck"));
        }
        Ok(NeckWeight { center: frame.region.outer.center })
    }

    pub fn ghost_weight(&self, frame: &PieceFrame) -> Result<GhostWeight> {
        let g = self.pieces[frame.piece].ghost.ok_or(Error::KindMismatch("ghost bubble domain"))?;
        let sigma = self.ghosts[g].sigma.evaluate(frame.t);
        Ok(GhostWeight::new(
            frame.region.outer.center,
            sigma,
            self.delta,
            frame.region.holes.iter().map(|h| h.center).collect(),
        ))
    }
}

/// `1 / |z - c|^2`.
#[derive(Clone, Copy, Debug)]
pub struct NeckWeight {
    pub center: Complex64,
}

impl NeckWeight {
    pub fn new(center: Complex64) -> Self {
        NeckWeight { center }
    }
}

impl ConformalWeight for NeckWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Bar
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        let d = (z - self.center).norm_sqr();
        if d == 0.0 {
            return Err(Error::Pole);
        }
        Ok(1.0 / d)
    }
}

// collars in normalized radius: outer s = |z-c|/(2 sigma), inner rho = |z-c_k|/(delta sigma)
const OUTER_COLLAR: (f64, f64) = (0.75, 0.875);
const INNER_COLLAR: (f64, f64) = (1.125, 1.25);

/// Partition-of-unity blend of the boundary neck weights with the constant
/// `1/(2 sigma)^2` in the interior of a ghost piece.
#[derive(Clone, Debug)]
pub struct GhostWeight {
    pub center: Complex64,
    pub sigma: f64,
    pub delta: f64,
    pub hole_centers: Vec<Complex64>,
}

impl GhostWeight {
    pub fn new(center: Complex64, sigma: f64, delta: f64, hole_centers: Vec<Complex64>) -> Self {
        GhostWeight { center, sigma, delta, hole_centers }
    }

    fn outer_bump(&self, z: Complex64) -> f64 {
        let s = (z - self.center).norm() / (2.0 * self.sigma);
        smoothstep((s - OUTER_COLLAR.0) / (OUTER_COLLAR.1 - OUTER_COLLAR.0))
    }

    fn inner_bump(&self, z: Complex64, ck: Complex64) -> f64 {
        let rho = (z - ck).norm() / (self.delta * self.sigma);
        1.0 - smoothstep((rho - INNER_COLLAR.0) / (INNER_COLLAR.1 - INNER_COLLAR.0))
    }
}

impl ConformalWeight for GhostWeight {
    fn tag(&self) -> MetricTag {
        MetricTag::Bar
    }

    fn weight(&self, z: Complex64) -> Result<f64> {
        let mut chi_sum = 0.0;
        let mut w = 0.0;
        let chi = self.outer_bump(z);
        if chi > 0.0 {
            chi_sum += chi;
            w += chi / (z - self.center).norm_sqr();
        }
        for &ck in &self.hole_centers {
            let chi = self.inner_bump(z, ck);
            if chi > 0.0 {
                let d = (z - ck).norm_sqr();
                if d == 0.0 {
                    return Err(Error::Pole);
                }
                chi_sum += chi;
                w += chi / d;
            }
        }
        Ok(w + (1.0 - chi_sum) / (4.0 * self.sigma * self.sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::build_tree;
    use crate::rates::Rate;

    fn ex(c: i64, r: i64) -> RateExpr {
        RateExpr::real(Q::from_integer(c), Rate::integer(r))
    }

    fn bub(id: &str, center: RateExpr, p: i64) -> Bubble {
        Bubble::new(id, center, Scale::new(1.0, Rate::integer(p)).unwrap())
    }

    fn two() -> BubbleTree {
        build_tree(&[bub("l", ex(-1, 1), 2), bub("r", ex(1, 1), 2)]).unwrap()
    }

    #[test]
    fn center_of_mass_examples() {
        let a = bub("a", ex(-1, 1), 2);
        let b = bub("b", ex(1, 1), 2);
        assert!(center_of_mass(&[&a, &b]).is_zero());
        let c = Bubble::new("c", RateExpr::real(Q::new(1, 5), Rate::zero()), Scale::unit());
        let d = Bubble::new("d", RateExpr::real(Q::new(2, 5), Rate::zero()), Scale::unit());
        assert_eq!(center_of_mass(&[&c, &d]), RateExpr::real(Q::new(3, 10), Rate::zero()));
        assert_eq!(center_of_mass(&[&a]), a.center);
    }

    #[test]
    fn sigma_examples() {
        let a = bub("a", ex(-1, 1), 2);
        let b = bub("b", ex(1, 1), 2);
        let s = ghost_sigma(&[&a, &b]).unwrap();
        assert_eq!((s.coef, s.rate), (4.0, Rate::integer(1)));
        let x = bub("x", RateExpr::zero(), 3);
        let y = bub("y", ex(3, 2), 3);
        let z = bub("z", RateExpr::term(crate::rates::Coeff::new(Q::zero(), Q::from_integer(4)), Rate::integer(2)), 3);
        let s = ghost_sigma(&[&x, &y, &z]).unwrap();
        assert!((s.coef - 10.0).abs() < 1e-12);
        assert_eq!(s.rate, Rate::integer(2));
        assert!(matches!(ghost_sigma(&[&a, &a]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn delta_examples() {
        assert_eq!(choose_delta(&two()).unwrap(), 0.1);
        assert_eq!(choose_delta(&build_tree(&[]).unwrap()).unwrap(), 0.1);
        let close = build_tree(&[
            Bubble::new("a", RateExpr::zero(), Scale::new(1.0, Rate::integer(1)).unwrap()),
            Bubble::new("b", RateExpr::real(Q::new(1, 50), Rate::zero()), Scale::new(1.0, Rate::integer(1)).unwrap()),
        ])
        .unwrap();
        assert!((choose_delta(&close).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn single_bubble_pieces() {
        let t = build_tree(&[bub("a", RateExpr::zero(), 1)]).unwrap();
        let g = decompose(&t, 0.1).unwrap();
        assert_eq!(g.count(PieceKind::BubbleDomain), 2);
        assert_eq!(g.count(PieceKind::SimpleNeck), 1);
        assert_eq!(g.m1(), 0);
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn two_bubble_pieces() {
        let g = decompose(&two(), 0.1).unwrap();
        assert_eq!(g.pieces().len(), 7);
        assert_eq!(g.count(PieceKind::GhostBubbleDomain), 1);
        assert_eq!(g.count(PieceKind::SimpleNeck), 3);
        assert_eq!((g.m1(), g.m2()), (1, 3));
        let loc: Vec<f64> = g.ghosts()[0].concentration.iter().map(|p| p.location.re).collect();
        assert!(loc.iter().any(|&x| (x + 0.25).abs() < 1e-12));
        assert!(loc.iter().any(|&x| (x - 0.25).abs() < 1e-12));
        // every circle bounds one or two pieces
        for c in 0..g.circles().len() {
            let n = g.pieces_on(c).len();
            assert!(n == 1 || n == 2);
        }
    }

    #[test]
    fn chain_is_two_nested_necks() {
        let t = build_tree(&[bub("b1", RateExpr::zero(), 1), bub("b2", RateExpr::zero(), 3)]).unwrap();
        let g = decompose(&t, 0.1).unwrap();
        assert_eq!(g.count(PieceKind::SimpleNeck), 2);
        assert_eq!(g.m1(), 0);
        assert_eq!(g.neck_domains().len(), 2);
    }

    #[test]
    fn validity_examples() {
        let g = decompose(&two(), 0.1).unwrap();
        assert!(!g.validate_at_index(0.5).passed);
        let r = g.validate_at_index(20.0);
        assert!(r.passed);
        assert!(r.min_passing_t.unwrap() <= 20.0);
        let e = decompose(&build_tree(&[]).unwrap(), 0.1).unwrap();
        assert!(e.validate_at_index(0.0).passed);
    }

    #[test]
    fn neck_weight_examples() {
        let w = NeckWeight::new(Complex64::zero());
        assert!((w.weight(Complex64::new(0.1, 0.0)).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(w.weight(Complex64::new(0.0, 1.0)).unwrap(), 1.0);
        let w = NeckWeight::new(Complex64::new(0.5, 0.0));
        assert_eq!(w.weight(Complex64::new(0.5, 0.0)), Err(Error::Pole));
    }

    #[test]
    fn ghost_weight_matches_necks() {
        let g = decompose(&two(), 0.1).unwrap();
        let t = 20.0;
        let gp = g.ghosts()[0].piece;
        let fr = g.frame(gp, t);
        let w = g.ghost_weight(&fr).unwrap();
        let sigma = w.sigma;
        for k in 0..16 {
            let e = Complex64::from_polar(1.0, k as f64 * 0.4);
            let z = e * 2.0 * sigma;
            let expect = 1.0 / z.norm_sqr();
            assert!((w.weight(z).unwrap() / expect - 1.0).abs() < 1e-14);
            for h in &fr.region.holes {
                let z = h.center + e * h.radius;
                let expect = 1.0 / (z - h.center).norm_sqr();
                assert!((w.weight(z).unwrap() / expect - 1.0).abs() < 1e-14);
            }
        }
        let mid = w.weight(Complex64::new(0.0, 0.0)).unwrap();
        assert!((mid * 4.0 * sigma * sigma - 1.0).abs() < 1e-14);
        assert!(g.neck_weight(&fr).is_err());
    }

    #[test]
    fn ghost_weight_comparable() {
        let w = GhostWeight::new(Complex64::zero(), 1.0, 0.1, vec![Complex64::new(-0.25, 0.0), Complex64::new(0.25, 0.0)]);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in -100..=100 {
            for j in -100..=100 {
                let z = Complex64::new(i as f64 * 0.02, j as f64 * 0.02);
                if z.norm() > 2.0 || w.hole_centers.iter().any(|c| (z - c).norm() < 0.1) {
                    continue;
                }
                let v = w.weight(z).unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(hi / lo <= 64.0 / 0.01);
    }

    #[test]
    fn neck_log_ratio_slope() {
        let t = build_tree(&[bub("a", RateExpr::zero(), 1)]).unwrap();
        let g = decompose(&t, 0.1).unwrap();
        let neck = g.pieces().iter().find(|p| p.kind == PieceKind::SimpleNeck).unwrap();
        let f = |t: f64| {
            let fr = g.frame(neck.id, t);
            (fr.region.outer.radius / fr.region.holes[0].radius).ln()
        };
        let slope = (f(30.0) - f(10.0)) / 20.0;
        assert!((slope - 1.0).abs() < 1e-6);
    }
}
