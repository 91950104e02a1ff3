//! Block decomposition of the periodic lattice.

use serde::{Deserialize, Serialize};

use crate::lattice::Direction;
use crate::{Error, Result};

/// One rectangular block `G_i` hosted by one PE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: usize,
    /// Position in the PE grid.
    pub pe_row: usize,
    pub pe_col: usize,
    /// Lattice coordinates of the top-left atom.
    pub row0: usize,
    pub col0: usize,
    pub width: usize,
    pub height: usize,
    lattice_width: usize,
    lattice_height: usize,
    /// Neighboring PE per [`Direction`]; `None` when the PE grid has a single
    /// row (or column) and the block wraps onto itself in that direction.
    pub neighbors: [Option<usize>; 4],
    /// Global ids of atoms with a neighbor outside the block.
    pub boundary: Vec<usize>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block-local index (row-major within the block) of a global atom.
    pub fn local_of(&self, atom: usize) -> Option<usize> {
        let (r, c) = (atom / self.lattice_width, atom % self.lattice_width);
        let dr = (r + self.lattice_height - self.row0) % self.lattice_height;
        let dc = (c + self.lattice_width - self.col0) % self.lattice_width;
        (dr < self.height && dc < self.width).then(|| dr * self.width + dc)
    }

    pub fn global_of(&self, local: usize) -> usize {
        let (dr, dc) = (local / self.width, local % self.width);
        (self.row0 + dr) * self.lattice_width + self.col0 + dc
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.local_of(atom).is_some()
    }

    /// Whether the atom lies on the edge facing `dir` and that edge borders
    /// another PE.
    pub fn on_edge(&self, atom: usize, dir: Direction) -> bool {
        if self.neighbors[dir.index()].is_none() {
            return false;
        }
        match self.local_of(atom) {
            None => false,
            Some(l) => {
                let (r, c) = (l / self.width, l % self.width);
                match dir {
                    Direction::Up => r == 0,
                    Direction::Down => r + 1 == self.height,
                    Direction::Left => c == 0,
                    Direction::Right => c + 1 == self.width,
                }
            }
        }
    }

    pub fn is_boundary(&self, atom: usize) -> bool {
        Direction::ALL.iter().any(|&d| self.on_edge(atom, d))
    }

    /// Distinct neighboring PEs.
    pub fn neighbor_pes(&self) -> Vec<usize> {
        let mut pes: Vec<usize> = self.neighbors.iter().flatten().copied().collect();
        pes.sort_unstable();
        pes.dedup();
        pes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub width: usize,
    pub height: usize,
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub blocks: Vec<Block>,
}

impl Partition {
    pub fn num_pes(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_width(&self) -> usize {
        self.width / self.pe_cols
    }

    pub fn block_height(&self) -> usize {
        self.height / self.pe_rows
    }

    pub fn owner(&self, atom: usize) -> usize {
        let (r, c) = (atom / self.width, atom % self.width);
        (r / self.block_height()) * self.pe_cols + c / self.block_width()
    }

    /// `|∂G_i|`, equal for every block.
    pub fn boundary_size(&self) -> usize {
        self.blocks[0].boundary.len()
    }
}

/// Splits a `width × height` lattice into a `pe_rows × pe_cols` grid of
/// congruent blocks with periodic PE adjacency.
pub fn make_partition(width: usize, height: usize, pe_rows: usize, pe_cols: usize) -> Result<Partition> {
    if width < 3 || height < 3 {
        return Err(Error::Partition(format!("lattice {width}x{height} is smaller than 3x3")));
    }
    if pe_rows == 0 || pe_cols == 0 {
        return Err(Error::Partition("PE grid dimensions must be positive".into()));
    }
    if !height.is_multiple_of(pe_rows) || !width.is_multiple_of(pe_cols) {
        return Err(Error::Partition(format!(
            "PE grid {pe_rows}x{pe_cols} does not divide lattice {width}x{height}"
        )));
    }
    let (bw, bh) = (width / pe_cols, height / pe_rows);
    if bw < 2 || bh < 2 {
        return Err(Error::Partition(format!("block {bw}x{bh} is thinner than 2 atoms")));
    }
    let pe_id = |r: usize, c: usize| r * pe_cols + c;
    let mut blocks = Vec::with_capacity(pe_rows * pe_cols);
    for pr in 0..pe_rows {
        for pc in 0..pe_cols {
            let vertical = pe_rows > 1;
            let horizontal = pe_cols > 1;
            let neighbors = [
                vertical.then(|| pe_id((pr + pe_rows - 1) % pe_rows, pc)),
                vertical.then(|| pe_id((pr + 1) % pe_rows, pc)),
                horizontal.then(|| pe_id(pr, (pc + pe_cols - 1) % pe_cols)),
                horizontal.then(|| pe_id(pr, (pc + 1) % pe_cols)),
            ];
            let mut block = Block {
                id: pe_id(pr, pc),
                pe_row: pr,
                pe_col: pc,
                row0: pr * bh,
                col0: pc * bw,
                width: bw,
                height: bh,
                lattice_width: width,
                lattice_height: height,
                neighbors,
                boundary: Vec::new(),
            };
            block.boundary = (0..bw * bh)
                .map(|l| block.global_of(l))
                .filter(|&a| block.is_boundary(a))
                .collect();
            blocks.push(block);
        }
    }
    Ok(Partition { width, height, pe_rows, pe_cols, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Init, Lattice};

    #[test]
    fn two_by_two_on_sixteen() {
        let p = make_partition(16, 16, 2, 2).unwrap();
        assert_eq!(p.num_pes(), 4);
        for b in &p.blocks {
            assert_eq!((b.width, b.height), (8, 8));
            assert_eq!(b.boundary.len(), 28);
            assert_eq!(b.neighbor_pes().len(), 2);
        }
        assert_eq!(p.boundary_size(), 28);
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(make_partition(10, 10, 4, 4), Err(Error::Partition(_))));
        assert!(matches!(make_partition(16, 16, 3, 3), Err(Error::Partition(_))));
        assert!(matches!(make_partition(8, 8, 8, 1), Err(Error::Partition(_))));
    }

    #[test]
    fn single_block_has_no_boundary() {
        let p = make_partition(6, 6, 1, 1).unwrap();
        assert_eq!(p.num_pes(), 1);
        assert!(p.blocks[0].boundary.is_empty());
        assert!(p.blocks[0].neighbor_pes().is_empty());
    }

    #[test]
    fn blocks_tile_the_lattice() {
        for (w, h, pr, pc) in [(16, 16, 2, 2), (12, 9, 3, 4), (8, 6, 1, 4), (6, 8, 4, 1)] {
            let p = make_partition(w, h, pr, pc).unwrap();
            let mut owner = vec![usize::MAX; w * h];
            for b in &p.blocks {
                for l in 0..b.len() {
                    let a = b.global_of(l);
                    assert_eq!(owner[a], usize::MAX);
                    owner[a] = b.id;
                    assert_eq!(b.local_of(a), Some(l));
                }
            }
            for (a, &o) in owner.iter().enumerate() {
                assert_eq!(p.owner(a), o);
            }
            let sizes: Vec<_> = p.blocks.iter().map(|b| b.boundary.len()).collect();
            assert!(sizes.iter().all(|&s| s == sizes[0]));
        }
    }

    #[test]
    fn boundary_matches_neighbor_definition() {
        let p = make_partition(12, 8, 2, 3).unwrap();
        let lat = Lattice::new(12, 8, Init::AllUp).unwrap();
        for b in &p.blocks {
            for l in 0..b.len() {
                let a = b.global_of(l);
                let outside = lat.neighbors(a).iter().any(|&n| !b.contains(n));
                assert_eq!(outside, b.boundary.contains(&a));
            }
        }
    }

    #[test]
    fn corner_atom_is_on_two_edges() {
        let p = make_partition(8, 8, 2, 2).unwrap();
        let b = &p.blocks[0];
        assert!(b.on_edge(0, Direction::Up) && b.on_edge(0, Direction::Left));
        assert!(!b.on_edge(0, Direction::Right));
    }
}
