//! 0-dimensional persistence of the superlevel-set filtration.
//!
//! Pixels are swept from high to low value. Each pixel either starts a new
//! component (it is a local maximum) or joins the components of its already
//! swept neighbors. When two components meet, the younger one dies at the
//! current pixel (the elder rule), which gives one persistence pair per local
//! maximum. The component holding the global maximum never dies.
//!
//! Ties are resolved by the total order `(value descending, linear index
//! ascending)`, so a plateau yields a single maximum at its first pixel in
//! that order and the diagram is fully deterministic.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar_field::ScalarImage;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    /// In-bounds neighbors of `(x, y)`.
    pub fn neighbors(
        self,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    ) -> impl Iterator<Item = (usize, usize)> {
        const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        let offsets: &'static [(isize, isize)] = match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        };
        offsets.iter().filter_map(move |&(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            (nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height)
                .then_some((nx as usize, ny as usize))
        })
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Four => "4",
            Connectivity::Eight => "8",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(Error::InvalidConfig(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

/// A local maximum and the saddle where its component merges into an elder one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub extremum_index: usize,
    pub extremum_value: f64,
    /// `None` for the essential class.
    pub saddle_index: Option<usize>,
    pub saddle_value: Option<f64>,
    /// `extremum_value - saddle_value`, or `+inf` for the essential class.
    pub persistence: f64,
}

impl PersistencePair {
    pub fn is_essential(&self) -> bool {
        self.saddle_index.is_none()
    }
}

/// Persistence pairs sorted by persistence (descending), then extremum index.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pairs: Vec<PersistencePair>,
    connectivity: Connectivity,
    width: usize,
    height: usize,
}

/// `(value descending, index ascending)`: earlier in the sweep compares as less.
#[inline]
pub fn sweep_order(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a]).then(a.cmp(&b))
}

fn pair_order(a: &PersistencePair, b: &PersistencePair) -> Ordering {
    b.persistence
        .total_cmp(&a.persistence)
        .then(a.extremum_index.cmp(&b.extremum_index))
}

impl PersistenceDiagram {
    /// Assembles a diagram from unsorted pairs.
    pub fn from_pairs(
        mut pairs: Vec<PersistencePair>,
        connectivity: Connectivity,
        width: usize,
        height: usize,
    ) -> Self {
        pairs.sort_by(pair_order);
        Self {
            pairs,
            connectivity,
            width,
            height,
        }
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn finite_pairs(&self) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(|p| !p.is_essential())
    }

    fn with_pairs(&self, pairs: Vec<PersistencePair>) -> Self {
        Self {
            pairs,
            connectivity: self.connectivity,
            width: self.width,
            height: self.height,
        }
    }

    /// CSV with pixel coordinates as (column, row); infinite persistence is `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "extremum_x,extremum_y,extremum_value,saddle_x,saddle_y,saddle_value,persistence\n",
        );
        let w = self.width;
        for p in &self.pairs {
            let (ex, ey) = (p.extremum_index % w, p.extremum_index / w);
            let (sx, sy, sv) = match (p.saddle_index, p.saddle_value) {
                (Some(s), Some(v)) => ((s % w).to_string(), (s / w).to_string(), v.to_string()),
                _ => (String::new(), String::new(), String::new()),
            };
            let pers = if p.persistence.is_infinite() {
                "inf".to_string()
            } else {
                p.persistence.to_string()
            };
            out.push_str(&format!(
                "{ex},{ey},{},{sx},{sy},{sv},{pers}\n",
                p.extremum_value
            ));
        }
        out
    }
}

/// Union-find over pixel indices. Each root remembers the birth pixel of its
/// component, which is always the eldest pixel in sweep order.
struct Components {
    parent: Vec<u32>,
    birth: Vec<u32>,
}

const UNSEEN: u32 = u32::MAX;

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: vec![UNSEEN; n],
            birth: vec![UNSEEN; n],
        }
    }

    fn is_seen(&self, i: usize) -> bool {
        self.parent[i] != UNSEEN
    }

    fn make(&mut self, i: usize) {
        self.parent[i] = i as u32;
        self.birth[i] = i as u32;
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = i;
        while self.parent[cur] as usize != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }
}

/// Computes the 0-dimensional superlevel-set persistence diagram of `image`.
pub fn compute_diagram(
    image: &ScalarImage,
    connectivity: Connectivity,
) -> Result<PersistenceDiagram> {
    let (w, h) = image.dims();
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    if w * h >= UNSEEN as usize {
        return Err(Error::InvalidImage(
            "image too large for the persistence sweep".into(),
        ));
    }
    let values = image.values();
    let mut order: Vec<u32> = (0..(w * h) as u32).collect();
    order.sort_unstable_by(|&a, &b| sweep_order(values, a as usize, b as usize));

    let mut comps = Components::new(w * h);
    let mut pairs = Vec::new();
    let mut roots: Vec<usize> = Vec::with_capacity(8);

    for &p in &order {
        let p = p as usize;
        let (x, y) = (p % w, p / w);
        roots.clear();
        for (nx, ny) in connectivity.neighbors(x, y, w, h) {
            let q = ny * w + nx;
            if comps.is_seen(q) {
                let r = comps.find(q);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        comps.make(p);
        if roots.is_empty() {
            continue;
        }
        // The root whose birth comes first in sweep order survives.
        let elder = *roots
            .iter()
            .min_by(|&&a, &&b| {
                sweep_order(values, comps.birth[a] as usize, comps.birth[b] as usize)
            })
            .expect("non-empty");
        for &r in &roots {
            if r != elder {
                let birth = comps.birth[r] as usize;
                pairs.push(PersistencePair {
                    extremum_index: birth,
                    extremum_value: values[birth],
                    saddle_index: Some(p),
                    saddle_value: Some(values[p]),
                    persistence: values[birth] - values[p],
                });
                comps.parent[r] = elder as u32;
            }
        }
        comps.parent[p] = elder as u32;
    }

    for i in 0..w * h {
        if comps.parent[i] as usize == i {
            let birth = comps.birth[i] as usize;
            pairs.push(PersistencePair {
                extremum_index: birth,
                extremum_value: values[birth],
                saddle_index: None,
                saddle_value: None,
                persistence: f64::INFINITY,
            });
        }
    }

    Ok(PersistenceDiagram::from_pairs(pairs, connectivity, w, h))
}

/// Keeps pairs with `persistence >= min_persistence`; essential pairs always survive.
pub fn filter_by_persistence(
    diagram: &PersistenceDiagram,
    min_persistence: f64,
) -> PersistenceDiagram {
    diagram.with_pairs(
        diagram
            .pairs
            .iter()
            .filter(|p| p.is_essential() || p.persistence >= min_persistence)
            .copied()
            .collect(),
    )
}

/// The first `k` pairs in diagram order.
pub fn top_k(diagram: &PersistenceDiagram, k: usize) -> PersistenceDiagram {
    diagram.with_pairs(diagram.pairs.iter().take(k).copied().collect())
}
