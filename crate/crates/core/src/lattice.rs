//! Finite pieces of ℤᵈ: sites, nearest-neighbour edges, regions with their
//! outer boundary, and exhausting sequences of regions.
//!
//! A [`Region`] is always an explicit finite site set. The infinite lattice
//! only shows up implicitly when the outer boundary ∂Δ and the crossing edges
//! are computed.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point x ∈ ℤᵈ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "a site needs at least one coordinate");
        Site(coords)
    }

    pub fn origin(d: usize) -> Self {
        Site::new(vec![0; d])
    }

    /// One-dimensional site, handy for chains.
    pub fn line(x: i64) -> Self {
        Site(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// ℓ¹ norm |x|.
    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn is_adjacent(&self, other: &Site) -> bool {
        self.dim() == other.dim() && self.l1_distance(other) == 1
    }

    /// The 2d nearest neighbours, ordered axis by axis (−e_i before +e_i).
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Site(c)
            })
        })
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Unordered nearest-neighbour pair ⟨x,y⟩, stored with the lexicographically
/// smaller endpoint first so that lookups are deterministic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    a: Site,
    b: Site,
}

impl Edge {
    pub fn new(x: Site, y: Site) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        if !x.is_adjacent(&y) {
            return Err(Error::NotAdjacent(x, y));
        }
        Ok(if x <= y { Edge { a: x, b: y } } else { Edge { a: y, b: x } })
    }

    pub fn endpoints(&self) -> (&Site, &Site) {
        (&self.a, &self.b)
    }

    pub fn contains(&self, x: &Site) -> bool {
        &self.a == x || &self.b == x
    }

    /// The endpoint that is not `x`, if `x` is an endpoint.
    pub fn other(&self, x: &Site) -> Option<&Site> {
        if &self.a == x {
            Some(&self.b)
        } else if &self.b == x {
            Some(&self.a)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.a, self.b)
    }
}

/// A finite Δ ⋐ ℤᵈ together with E_Δ, ∂Δ and the edges crossing from Δ to ∂Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RegionJson", try_from = "RegionJson")]
pub struct Region {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    interior_edges: Vec<Edge>,
    boundary: Vec<Site>,
    cross_edges: Vec<(Site, Site)>,
}

impl Region {
    /// Builds a region from an arbitrary non-empty site set.
    pub fn from_sites<I: IntoIterator<Item = Site>>(d: usize, sites: I) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let set: BTreeSet<Site> = sites.into_iter().collect();
        if set.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if let Some(bad) = set.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let sites: Vec<Site> = set.iter().cloned().collect();
        let index = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect::<HashMap<_, _>>();

        let mut interior = BTreeSet::new();
        let mut boundary = BTreeSet::new();
        let mut cross = BTreeSet::new();
        for x in &sites {
            for y in x.neighbors() {
                if set.contains(&y) {
                    interior.insert(Edge::new(x.clone(), y)?);
                } else {
                    boundary.insert(y.clone());
                    cross.insert((x.clone(), y));
                }
            }
        }
        Ok(Region {
            d,
            sites,
            index,
            interior_edges: interior.into_iter().collect(),
            boundary: boundary.into_iter().collect(),
            cross_edges: cross.into_iter().collect(),
        })
    }

    /// Contiguous one-dimensional chain {start, …, start+len−1}.
    pub fn chain(start: i64, len: usize) -> Result<Self> {
        Region::from_sites(1, (0..len as i64).map(|k| Site::line(start + k)))
    }

    /// Centred chain {−h, …, h}.
    pub fn centered_chain(half_width: usize) -> Result<Self> {
        make_box(&Site::origin(1), &[half_width])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    /// Position of `x` in [`Region::sites`].
    pub fn index_of(&self, x: &Site) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn interior_edges(&self) -> &[Edge] {
        &self.interior_edges
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    /// Pairs (x, y) with x ∈ Δ, y ∈ ∂Δ, x ∼ y.
    pub fn cross_edges(&self) -> &[(Site, Site)] {
        &self.cross_edges
    }

    /// Every edge touching Δ: E_Δ followed by the crossing edges.
    pub fn all_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.interior_edges.iter().cloned().chain(
            self.cross_edges
                .iter()
                .map(|(x, y)| Edge::new(x.clone(), y.clone()).expect("cross edge is adjacent")),
        )
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.d == other.d && self.sites.iter().all(|s| other.contains(s))
    }

    pub fn is_disjoint_from(&self, other: &Region) -> bool {
        self.sites.iter().all(|s| !other.contains(s))
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        Region::from_sites(self.d, self.sites.iter().chain(&other.sites).cloned())
    }

    /// Sites of Δ with every neighbour in Δ.
    pub fn is_interior_site(&self, x: &Site) -> bool {
        self.contains(x) && x.neighbors().all(|y| self.contains(&y))
    }

    /// Connected components of the graph (Δ, E_Δ), in order of their smallest site.
    pub fn components(&self) -> Vec<Region> {
        let n = self.len();
        let mut adjacency = vec![Vec::new(); n];
        for e in &self.interior_edges {
            let (a, b) = e.endpoints();
            let (i, j) = (self.index[a], self.index[b]);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut members = Vec::new();
            while let Some(i) = stack.pop() {
                members.push(self.sites[i].clone());
                for &j in &adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            out.push(Region::from_sites(self.d, members).expect("component is non-empty"));
        }
        out
    }

    /// If (Δ, E_Δ) is a simple path, the site indices in path order starting
    /// from the smaller endpoint.
    pub fn path_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        if self.interior_edges.len() + 1 != n {
            return None;
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &self.interior_edges {
            let (a, b) = e.endpoints();
            let (i, j) = (self.index[a], self.index[b]);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        if adjacency.iter().any(|a| a.len() > 2) {
            return None;
        }
        let start = (0..n).find(|&i| adjacency[i].len() <= 1)?;
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while order.len() < n {
            let next = adjacency[cur].iter().copied().find(|&j| j != prev)?;
            prev = cur;
            cur = next;
            order.push(cur);
        }
        Some(order)
    }

    /// Short stable digest of the site set, used to key result rows.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&RegionJson::from(self.clone())).expect("region serializes");
        crate::digest_hex(json.as_bytes())
    }
}

/// Axis-aligned box `center ± half_widths`.
pub fn make_box(center: &Site, half_widths: &[usize]) -> Result<Region> {
    let d = center.dim();
    if half_widths.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: half_widths.len(),
        });
    }
    let mut sites = vec![center.clone()];
    for (axis, &h) in half_widths.iter().enumerate() {
        let h = h as i64;
        sites = sites
            .into_iter()
            .flat_map(|s| {
                (-h..=h).map(move |k| {
                    let mut c = s.coords().to_vec();
                    c[axis] += k;
                    Site::new(c)
                })
            })
            .collect();
    }
    Region::from_sites(d, sites)
}

/// |∂Δ| / |Δ|.
pub fn van_hove_ratio(region: &Region) -> f64 {
    region.boundary().len() as f64 / region.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Cofinal,
    VanHove,
}

/// Regions ordered by inclusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSequence {
    regions: Vec<Region>,
    kind: SequenceKind,
}

impl RegionSequence {
    /// Checks nesting and, for van Hove sequences, that |∂Δ_n|/|Δ_n| does
    /// not increase.
    pub fn new(regions: Vec<Region>, kind: SequenceKind) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for (n, pair) in regions.windows(2).enumerate() {
            if !pair[0].is_subset_of(&pair[1]) {
                return Err(Error::NotNested(format!("region {n} is not inside region {}", n + 1)));
            }
            if kind == SequenceKind::VanHove && van_hove_ratio(&pair[1]) > van_hove_ratio(&pair[0]) {
                return Err(Error::NotNested(format!(
                    "boundary ratio increases between regions {n} and {}",
                    n + 1
                )));
            }
        }
        Ok(RegionSequence { regions, kind })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn last(&self) -> &Region {
        self.regions.last().expect("sequence is non-empty")
    }
}

/// Centred boxes of half-width 1..=n_max in dimension d.
pub fn cofinal_boxes(d: usize, n_max: usize) -> Result<RegionSequence> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let center = Site::origin(d);
    let regions = (1..=n_max)
        .map(|h| make_box(&center, &vec![h; d]))
        .collect::<Result<Vec<_>>>()?;
    RegionSequence::new(regions, SequenceKind::Cofinal)
}

/// Centred chains {−h..h} for each half-width in `half_widths` (increasing).
/// Chains have |∂Δ|/|Δ| = 2/(2h+1), so this is a van Hove sequence.
pub fn centered_chains(half_widths: &[usize]) -> Result<RegionSequence> {
    let regions = half_widths
        .iter()
        .map(|&h| Region::centered_chain(h))
        .collect::<Result<Vec<_>>>()?;
    RegionSequence::new(regions, SequenceKind::VanHove)
}

/// Serialized form of a region: `{"d":…, "sites":[[…]…], "boundary":[…]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionJson {
    pub d: usize,
    pub sites: Vec<Vec<i64>>,
    pub boundary: Vec<Vec<i64>>,
}

impl From<Region> for RegionJson {
    fn from(r: Region) -> Self {
        RegionJson {
            d: r.d,
            sites: r.sites.iter().map(|s| s.coords().to_vec()).collect(),
            boundary: r.boundary.iter().map(|s| s.coords().to_vec()).collect(),
        }
    }
}

impl TryFrom<RegionJson> for Region {
    type Error = Error;

    fn try_from(j: RegionJson) -> Result<Self> {
        let region = Region::from_sites(j.d, j.sites.into_iter().map(Site::new))?;
        let mut stored: Vec<Site> = j.boundary.into_iter().map(Site::new).collect();
        stored.sort();
        if stored != region.boundary {
            return Err(Error::InvalidParameter(
                "stored boundary does not match the site set".into(),
            ));
        }
        Ok(region)
    }
}
