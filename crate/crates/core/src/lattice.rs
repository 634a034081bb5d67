//! Rectangular lattices, their nearest-neighbour bonds and 1D chain orderings.
//!
//! Sites are indexed row-major: site `r * ly + c` sits in row `r`, column `c`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("lattice needs at least 2 sites, got {lx}x{ly}")]
    TooSmall { lx: usize, ly: usize },
    #[error("periodic {lx}x{ly} lattice would bond a site to itself; use open boundaries for a 1-wide lattice")]
    SelfBond { lx: usize, ly: usize },
    #[error("site {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingKind {
    RowMajor,
    Snake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    lx: usize,
    ly: usize,
    pbc: bool,
    /// chain position -> site
    ordering: Vec<usize>,
    /// site -> chain position
    position: Vec<usize>,
}

impl Lattice {
    pub fn new(lx: usize, ly: usize, pbc: bool, kind: OrderingKind) -> Result<Self, LatticeError> {
        if lx * ly < 2 {
            return Err(LatticeError::TooSmall { lx, ly });
        }
        if pbc && (lx == 1 || ly == 1) {
            return Err(LatticeError::SelfBond { lx, ly });
        }
        let ordering: Vec<usize> = match kind {
            OrderingKind::RowMajor => (0..lx * ly).collect(),
            OrderingKind::Snake => (0..lx)
                .flat_map(|r| {
                    (0..ly).map(move |k| if r % 2 == 0 { r * ly + k } else { r * ly + ly - 1 - k })
                })
                .collect(),
        };
        Ok(Self::with_ordering(lx, ly, pbc, ordering))
    }

    /// Open chain of `n` sites in natural order.
    pub fn chain(n: usize) -> Result<Self, LatticeError> {
        Self::new(1, n, false, OrderingKind::RowMajor)
    }

    fn with_ordering(lx: usize, ly: usize, pbc: bool, ordering: Vec<usize>) -> Self {
        let mut position = vec![0; ordering.len()];
        for (p, &s) in ordering.iter().enumerate() {
            position[s] = p;
        }
        Self {
            lx,
            ly,
            pbc,
            ordering,
            position,
        }
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn pbc(&self) -> bool {
        self.pbc
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    /// Site at each chain position.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// Chain position of `site`.
    pub fn position(&self, site: usize) -> usize {
        self.position[site]
    }

    pub fn check_site(&self, site: usize) -> Result<(), LatticeError> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(LatticeError::SiteOutOfRange {
                site,
                n: self.n_sites(),
            })
        }
    }

    /// One right and one down bond per site, wrapping when periodic.
    pub fn bonds(&self) -> Vec<Bond> {
        let (lx, ly) = (self.lx, self.ly);
        let mut out = Vec::with_capacity(2 * lx * ly);
        for r in 0..lx {
            for c in 0..ly {
                let s = r * ly + c;
                if c + 1 < ly {
                    out.push(Bond { a: s, b: s + 1, direction: Direction::Horizontal });
                } else if self.pbc {
                    out.push(Bond { a: s, b: r * ly, direction: Direction::Horizontal });
                }
                if r + 1 < lx {
                    out.push(Bond { a: s, b: s + ly, direction: Direction::Vertical });
                } else if self.pbc {
                    out.push(Bond { a: s, b: c, direction: Direction::Vertical });
                }
            }
        }
        out
    }

    pub fn chain_distance(&self, i: usize, j: usize) -> usize {
        self.position[i].abs_diff(self.position[j])
    }
}
