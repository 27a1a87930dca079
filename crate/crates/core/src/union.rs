//! Union background mesh: the finest common tiling of all fields' active
//! meshes, optionally refined further for geometry resolution.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::extraction::{compose_extraction, Extraction, LagrangeBasis};
use crate::polytree::{CellKey, PolyTreeForest, State};
use crate::thb::ThbBasis;

#[derive(Debug, Clone)]
pub struct UnionCell {
    /// Lattice key; levels beyond the forest depth are virtual.
    pub key: CellKey,
    pub lo: [f64; 2],
    pub h: [f64; 2],
    /// Active element of each field (same order as the AIs passed to
    /// `build_union`) containing this cell.
    pub field_cells: Vec<CellKey>,
}

impl UnionCell {
    /// Child positions leading from `ancestor` down to this cell.
    pub fn chain_from(&self, ancestor: CellKey) -> Vec<u8> {
        (ancestor.level + 1..=self.key.level).map(|l| self.key.ancestor(l).child_pos() as u8).collect()
    }

    pub fn to_local(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.lo[0]) / self.h[0], (x[1] - self.lo[1]) / self.h[1]]
    }

    pub fn to_global(&self, s: [f64; 2]) -> [f64; 2] {
        [self.lo[0] + s[0] * self.h[0], self.lo[1] + s[1] * self.h[1]]
    }

    pub fn area(&self) -> f64 {
        self.h[0] * self.h[1]
    }
}

#[derive(Debug, Clone)]
pub struct UnionMesh {
    pub cells: Vec<UnionCell>,
    pub ais: Vec<usize>,
    pub geom_refine: u32,
    index: HashMap<CellKey, usize>,
    lo: [f64; 2],
    hi: [f64; 2],
    counts: [usize; 2],
}

impl UnionMesh {
    /// Cells active for some AI and refined for none, each subdivided
    /// `geom_refine` more times.
    pub fn build_union(forest: &PolyTreeForest, ais: &[usize], geom_refine: u32) -> Result<Self> {
        for &a in ais {
            if a >= forest.n_ai() {
                return Err(Error::UnknownAi(a));
            }
        }
        if ais.is_empty() {
            return Err(Error::InvalidArgument("union needs at least one activation index".into()));
        }
        let (lo, hi) = forest.bounds();
        let mut cells = Vec::new();
        for (c, _) in forest.cells() {
            let st: Vec<State> = ais.iter().map(|&a| forest.state(c, a)).collect();
            if !st.contains(&State::Active) || st.contains(&State::Refined) {
                continue;
            }
            let field_cells: Vec<CellKey> = ais
                .iter()
                .map(|&a| forest.active_ancestor(c, a).expect("union cell without active field ancestor"))
                .collect();
            let s = 1i64 << geom_refine;
            let h0 = forest.cell_size(c.level + geom_refine);
            for dj in 0..s {
                for di in 0..s {
                    let key = CellKey::new(c.level + geom_refine, c.i * s + di, c.j * s + dj);
                    let lo = [lo[0] + key.i as f64 * h0[0], lo[1] + key.j as f64 * h0[1]];
                    cells.push(UnionCell { key, lo, h: h0, field_cells: field_cells.clone() });
                }
            }
        }
        cells.sort_by_key(|c| c.key);
        let index = cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
        Ok(UnionMesh { cells, ais: ais.to_vec(), geom_refine, index, lo, hi, counts: forest.counts() })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.lo, self.hi)
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn lattice(&self, level: u32) -> [i64; 2] {
        [(self.counts[0] << level) as i64, (self.counts[1] << level) as i64]
    }

    pub fn index_of(&self, k: CellKey) -> Option<usize> {
        self.index.get(&k).copied()
    }

    /// Union cell containing `x` (points on shared edges go up/right).
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let h0 = [(self.hi[0] - self.lo[0]) / self.counts[0] as f64, (self.hi[1] - self.lo[1]) / self.counts[1] as f64];
        let mut t = [(x[0] - self.lo[0]) / h0[0], (x[1] - self.lo[1]) / h0[1]];
        for d in 0..2 {
            let n = self.counts[d] as f64;
            if !(t[d] >= -1e-12 && t[d] <= n + 1e-12) {
                return None;
            }
            t[d] = t[d].clamp(0.0, n * (1.0 - 1e-15));
        }
        let maxl = self.cells.iter().map(|c| c.key.level).max().unwrap_or(0);
        (0..=maxl).find_map(|l| {
            let s = (1u64 << l) as f64;
            self.index_of(CellKey::new(l, (t[0] * s).floor() as i64, (t[1] * s).floor() as i64))
        })
    }

    /// Extraction operator of field `f` (position in `ais`) on cell `c`.
    pub fn extraction(&self, c: usize, f: usize, basis: &ThbBasis, lag: &LagrangeBasis) -> Result<Extraction> {
        let cell = &self.cells[c];
        let fc = cell.field_cells[f];
        let e = basis
            .element_index(fc)
            .ok_or_else(|| Error::Precondition(format!("field element {fc:?} missing from basis")))?;
        compose_extraction(basis, e, &cell.chain_from(fc), lag)
    }
}
