//! Bubbles, equivalence, the "on top of" order and the tree of real bubbles.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rates::{limit_ratio_scale, limit_scale_ratio, LimitClass, RateExpr, Scale};

pub const ROOT_ID: &str = "root";

#[derive(Clone, Debug, PartialEq)]
pub struct Bubble {
    pub id: String,
    pub center: RateExpr,
    pub scale: Scale,
}

impl Bubble {
    pub fn new(id: impl Into<String>, center: RateExpr, scale: Scale) -> Self {
        Bubble { id: id.into(), center, scale }
    }

    /// The trivial bubble `(0, 1)` standing for the weak limit.
    pub fn root() -> Self {
        Bubble::new(ROOT_ID, RateExpr::zero(), Scale::unit())
    }
}

pub fn is_equivalent(b1: &Bubble, b2: &Bubble) -> bool {
    matches!(limit_scale_ratio(&b1.scale, &b2.scale), LimitClass::Finite(_))
        && limit_ratio_scale(&(&b1.center - &b2.center), &b1.scale).is_bounded()
}

/// `b1` on top of `b2`: `b1` shrinks strictly faster and stays within a
/// bounded multiple of `b2`'s scale.
pub fn is_on_top_of(b1: &Bubble, b2: &Bubble) -> bool {
    limit_scale_ratio(&b1.scale, &b2.scale) == LimitClass::Zero
        && limit_ratio_scale(&(&b1.center - &b2.center), &b2.scale).is_bounded()
}

pub fn check_separated(b1: &Bubble, b2: &Bubble) -> bool {
    let slower = if b1.scale.rate < b2.scale.rate
        || (b1.scale.rate == b2.scale.rate && b1.scale.coef >= b2.scale.coef)
    {
        &b1.scale
    } else {
        &b2.scale
    };
    limit_ratio_scale(&(&b1.center - &b2.center), slower) == LimitClass::Infinite
}

/// Tree of real bubbles. Node 0 is always the root.
#[derive(Clone, Debug)]
pub struct BubbleTree {
    nodes: Vec<Bubble>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl BubbleTree {
    pub fn nodes(&self) -> &[Bubble] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Bubble {
        &self.nodes[idx]
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|b| b.id == id)
    }

    /// Real bubbles other than the root.
    pub fn real_bubbles(&self) -> &[Bubble] {
        &self.nodes[1..]
    }

    /// `(child id, parent id)` pairs sorted by child id; equal for trees that
    /// differ only by input order.
    pub fn canonical_edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = (1..self.nodes.len())
            .map(|i| {
                let p = self.parent[i].expect("non-root has a parent");
                (self.nodes[i].id.clone(), self.nodes[p].id.clone())
            })
            .collect();
        out.sort();
        out
    }
}

pub fn build_tree(bubbles: &[Bubble]) -> Result<BubbleTree> {
    let mut nodes = vec![Bubble::root()];
    for b in bubbles {
        if b.id == ROOT_ID {
            return Err(Error::Schema { field: "id".into(), msg: "`root` is reserved".into() });
        }
        nodes.push(b.clone());
    }
    let n = nodes.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if is_equivalent(&nodes[i], &nodes[j]) {
                return Err(Error::Equivalent(nodes[i].id.clone(), nodes[j].id.clone()));
            }
        }
    }
    for b in &nodes[1..] {
        if !is_on_top_of(b, &nodes[0]) {
            return Err(Error::NotOnTopOfRoot(b.id.clone()));
        }
    }
    // full order, then transitive reduction
    let above: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i != j && is_on_top_of(&nodes[i], &nodes[j])).collect())
        .collect();
    let mut parent = vec![None; n];
    for i in 1..n {
        let direct: Vec<usize> = (0..n)
            .filter(|&j| above[i][j])
            .filter(|&j| !(0..n).any(|k| k != j && above[i][k] && above[k][j]))
            .collect();
        match direct.as_slice() {
            [p] => parent[i] = Some(*p),
            _ => return Err(Error::AmbiguousParent(nodes[i].id.clone())),
        }
    }
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        children[parent[i].unwrap()].push(i);
    }
    Ok(BubbleTree { nodes, parent, children })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationPoint {
    pub location: Complex64,
    /// indices of the concentrated bubbles in whatever list they came from
    pub members: Vec<usize>,
}

const LOCATION_TOL: f64 = 1e-12;

/// Groups `centers` by the limit of `(center - origin) / scale`.
pub(crate) fn group_by_limit(
    centers: &[(usize, &RateExpr, &str)],
    origin: &RateExpr,
    scale: &Scale,
) -> Result<Vec<ConcentrationPoint>> {
    let mut points: Vec<ConcentrationPoint> = Vec::new();
    for &(idx, center, id) in centers {
        let loc = match limit_ratio_scale(&(center - origin), scale) {
            LimitClass::Zero => Complex64::new(0.0, 0.0),
            LimitClass::Finite(v) => v,
            LimitClass::Infinite => return Err(Error::InfiniteConcentration(id.to_string())),
        };
        match points.iter_mut().find(|p| (p.location - loc).norm() <= LOCATION_TOL) {
            Some(p) => p.members.push(idx),
            None => points.push(ConcentrationPoint { location: loc, members: vec![idx] }),
        }
    }
    Ok(points)
}

/// Concentration set of `node`; members are tree node indices.
pub fn concentration_points(tree: &BubbleTree, node: usize) -> Result<Vec<ConcentrationPoint>> {
    let b = tree.node(node);
    let centers: Vec<(usize, &RateExpr, &str)> = tree
        .children(node)
        .iter()
        .map(|&c| (c, &tree.node(c).center, tree.node(c).id.as_str()))
        .collect();
    let points = group_by_limit(&centers, &b.center, &b.scale)?;
    if let Some(p) = points.iter().find(|p| p.location.norm() > 1.0 + LOCATION_TOL) {
        return Err(Error::ConcentrationOutsideUnitDisk(p.location.norm()));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{Rate, Q};
    use proptest::prelude::*;

    fn ex(c: f64, r: i64) -> RateExpr {
        let q = Q::approximate_float(c).unwrap();
        RateExpr::real(q, Rate::integer(r))
    }

    fn bub(id: &str, center: RateExpr, a: f64, p: i64) -> Bubble {
        Bubble::new(id, center, Scale::new(a, Rate::integer(p)).unwrap())
    }

    #[test]
    fn equivalence_examples() {
        assert!(is_equivalent(&bub("a", RateExpr::zero(), 1.0, 1), &bub("b", ex(0.5, 1), 2.0, 1)));
        assert!(!is_equivalent(&bub("a", RateExpr::zero(), 1.0, 1), &bub("b", RateExpr::zero(), 1.0, 2)));
        let half = RateExpr::real(Q::from_integer(1), Rate::new(Q::new(1, 2)).unwrap());
        assert!(!is_equivalent(&bub("a", RateExpr::zero(), 1.0, 1), &bub("b", half, 1.0, 1)));
    }

    #[test]
    fn on_top_examples() {
        let small = bub("s", RateExpr::zero(), 1.0, 2);
        let big = bub("b", RateExpr::zero(), 1.0, 1);
        assert!(is_on_top_of(&small, &big));
        assert!(!is_on_top_of(&big, &small));
        let far = bub("f", ex(1.0, 0), 1.0, 2);
        assert!(!is_on_top_of(&far, &big));
    }

    #[test]
    fn separation_examples() {
        let l = bub("l", ex(-1.0, 1), 1.0, 2);
        let r = bub("r", ex(1.0, 1), 1.0, 2);
        assert!(check_separated(&l, &r));
        let a = bub("a", RateExpr::zero(), 1.0, 2);
        let b = bub("b", ex(1.0, 2), 1.0, 2);
        assert!(!check_separated(&a, &b));
        assert!(!check_separated(&l, &l));
    }

    #[test]
    fn tree_examples() {
        let t = build_tree(&[]).unwrap();
        assert_eq!(t.len(), 1);

        let t = build_tree(&[bub("l", ex(-1.0, 1), 1.0, 2), bub("r", ex(1.0, 1), 1.0, 2)]).unwrap();
        assert_eq!(t.parent(1), Some(0));
        assert_eq!(t.parent(2), Some(0));

        let t = build_tree(&[bub("b1", RateExpr::zero(), 1.0, 1), bub("b2", RateExpr::zero(), 1.0, 3)]).unwrap();
        assert_eq!(t.parent(2), Some(1));
        assert_eq!(t.parent(1), Some(0));
    }

    #[test]
    fn tree_errors() {
        let dup = build_tree(&[bub("a", RateExpr::zero(), 1.0, 1), bub("b", ex(0.5, 1), 2.0, 1)]);
        assert!(matches!(dup, Err(Error::Equivalent(_, _))));
        let flat = build_tree(&[bub("a", ex(0.3, 0), 0.5, 0)]);
        assert!(matches!(flat, Err(Error::Equivalent(_, _)) | Err(Error::NotOnTopOfRoot(_))));
        let away = build_tree(&[bub("a", ex(1.0, 0), 0.5, 1)]);
        assert!(away.is_ok());
    }

    #[test]
    fn concentration_examples() {
        let t = build_tree(&[bub("l", ex(-1.0, 1), 1.0, 2), bub("r", ex(1.0, 1), 1.0, 2)]).unwrap();
        let pts = concentration_points(&t, 0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].location, Complex64::new(0.0, 0.0));
        assert_eq!(pts[0].members.len(), 2);

        let c1 = &ex(0.25, 0) + &ex(1.0, 2);
        let t = build_tree(&[bub("a", c1, 1.0, 1), bub("b", ex(-0.25, 0), 1.0, 1)]).unwrap();
        let mut locs: Vec<f64> = concentration_points(&t, 0).unwrap().iter().map(|p| p.location.re).collect();
        locs.sort_by(f64::total_cmp);
        assert!((locs[0] + 0.25).abs() < 1e-15 && (locs[1] - 0.25).abs() < 1e-15);
        assert!(concentration_points(&t, 1).unwrap().is_empty());
    }

    fn arb_bubble() -> impl Strategy<Value = Bubble> {
        (-3i64..=3, 0i64..=3, 1i64..=4, 1u32..=3).prop_map(|(c, cr, p, a)| {
            bub("x", RateExpr::real(Q::from_integer(c), Rate::integer(cr)), a as f64, p)
        })
    }

    proptest! {
        #[test]
        fn order_laws(a in arb_bubble(), b in arb_bubble(), c in arb_bubble()) {
            prop_assert!(!is_on_top_of(&a, &a));
            if is_on_top_of(&a, &b) && is_on_top_of(&b, &c) {
                prop_assert!(is_on_top_of(&a, &c));
            }
            prop_assert!(is_equivalent(&a, &a));
            prop_assert_eq!(is_equivalent(&a, &b), is_equivalent(&b, &a));
            if is_equivalent(&a, &b) && is_equivalent(&b, &c) {
                prop_assert!(is_equivalent(&a, &c));
            }
        }

        #[test]
        fn tree_is_permutation_invariant(seed in 0u64..500) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let list = vec![
                bub("a", ex(1.0, 1), 1.0, 2),
                bub("b", ex(-1.0, 1), 1.0, 2),
                bub("c", &ex(1.0, 1) + &ex(1.0, 2), 1.0, 4),
                bub("d", ex(1.0, 1), 1.0, 5),
            ];
            let reference = build_tree(&list).unwrap().canonical_edges();
            let mut shuffled = list.clone();
            shuffled.shuffle(&mut rng);
            let tree = build_tree(&shuffled).unwrap();
            prop_assert_eq!(tree.canonical_edges(), reference);
            for i in 1..tree.len() {
                let p = tree.parent(i).unwrap();
                prop_assert!(is_on_top_of(tree.node(i), tree.node(p)));
            }
        }
    }
}
