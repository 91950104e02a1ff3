//! Periodic square lattice of ±1 spins, the Hamiltonian, and flip probabilities.

use serde::{Deserialize, Serialize};

use crate::rngstream::{RngStream, INIT_STREAM};
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 10;

/// Neighbor directions, in the fixed order every reclassification walks them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Metropolis,
    Glauber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ferromagnetic coupling.
    pub j: f64,
    /// External field.
    pub h: f64,
    /// Inverse temperature with the Boltzmann constant absorbed.
    pub beta: f64,
    /// Attempt rate of a single atom.
    pub lambda: f64,
    pub rule: Rule,
}

impl ModelParams {
    pub fn new(j: f64, h: f64, beta: f64, lambda: f64, rule: Rule) -> Result<Self> {
        let params = ModelParams { j, h, beta, lambda, rule };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0) || !self.j.is_finite() {
            return Err(Error::InvalidParams(format!("J must be positive, got {}", self.j)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be non-negative, got {}", self.beta)));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParams(format!("H must be finite, got {}", self.h)));
        }
        Ok(())
    }

    /// Flip probabilities of the ten classes, indexed by [`ClassIndex`].
    pub fn class_probabilities(&self) -> [f64; NUM_CLASSES] {
        let mut p = [0.0; NUM_CLASSES];
        for (k, slot) in p.iter_mut().enumerate() {
            *slot = class_flip_prob(self, ClassIndex(k as u8));
        }
        p
    }
}

/// Energy change of flipping a spin `s` whose four neighbors sum to `sigma`.
pub fn delta_energy(params: &ModelParams, s: i8, sigma: i32) -> f64 {
    let s = s as f64;
    2.0 * params.j * s * sigma as f64 + 2.0 * params.h * s
}

pub fn flip_probability(params: &ModelParams, delta_e: f64) -> f64 {
    match params.rule {
        Rule::Metropolis => {
            if delta_e <= 0.0 {
                1.0
            } else {
                (-params.beta * delta_e).exp().min(1.0)
            }
        }
        // θ/(1+θ) written as 1/(1+1/θ) so large θ does not overflow to NaN.
        Rule::Glauber => 1.0 / (1.0 + (params.beta * delta_e).exp()),
    }
}

/// Class of an atom: `5·(s+1)/2 + up_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassIndex(pub u8);

impl ClassIndex {
    pub fn spin(self) -> i8 {
        if self.0 >= 5 {
            1
        } else {
            -1
        }
    }

    pub fn up_count(self) -> u8 {
        self.0 % 5
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

pub fn class_of(s: i8, up_count: u8) -> ClassIndex {
    debug_assert!(s == 1 || s == -1);
    debug_assert!(up_count <= 4);
    ClassIndex(5 * ((s + 1) / 2) as u8 + up_count)
}

pub fn class_flip_prob(params: &ModelParams, k: ClassIndex) -> f64 {
    let sigma = 2 * k.up_count() as i32 - 4;
    flip_probability(params, delta_energy(params, k.spin(), sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seed")]
pub enum Init {
    AllUp,
    AllDown,
    Random(u64),
}

/// Row-major periodic lattice; atom id = `row * width + col`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    width: usize,
    height: usize,
    spins: Vec<i8>,
}

impl Lattice {
    pub fn new(width: usize, height: usize, init: Init) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        let spins = match init {
            Init::AllUp => vec![1; n],
            Init::AllDown => vec![-1; n],
            Init::Random(seed) => {
                let mut stream = RngStream::new(seed, INIT_STREAM);
                (0..n)
                    .map(|_| if stream.next_pair().u < 0.5 { 1 } else { -1 })
                    .collect()
            }
        };
        Ok(Lattice { width, height, spins })
    }

    pub fn from_spins(width: usize, height: usize, spins: Vec<i8>) -> Result<Self> {
        check_dims(width, height)?;
        if spins.len() != width * height {
            return Err(Error::InvalidDimension { width, height });
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParams(format!("spin value {bad} is not ±1")));
        }
        Ok(Lattice { width, height, spins })
    }

    /// Alternating pattern with `+1` at the origin.
    pub fn checkerboard(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let spins = (0..width * height)
            .map(|v| if (v / width + v % width).is_multiple_of(2) { 1 } else { -1 })
            .collect();
        Ok(Lattice { width, height, spins })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spin(&self, v: usize) -> i8 {
        self.spins[v]
    }

    pub fn atom(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.width, v % self.width)
    }

    pub fn neighbor(&self, v: usize, dir: Direction) -> usize {
        let (r, c) = self.coords(v);
        let (w, h) = (self.width, self.height);
        match dir {
            Direction::Up => self.atom((r + h - 1) % h, c),
            Direction::Down => self.atom((r + 1) % h, c),
            Direction::Left => self.atom(r, (c + w - 1) % w),
            Direction::Right => self.atom(r, (c + 1) % w),
        }
    }

    pub fn neighbors(&self, v: usize) -> [usize; 4] {
        Direction::ALL.map(|d| self.neighbor(v, d))
    }

    pub fn neighbor_sum(&self, v: usize) -> i32 {
        self.neighbors(v).iter().map(|&n| self.spins[n] as i32).sum()
    }

    pub fn up_count(&self, v: usize) -> u8 {
        ((self.neighbor_sum(v) + 4) / 2) as u8
    }

    pub fn class_of_atom(&self, v: usize) -> ClassIndex {
        class_of(self.spins[v], self.up_count(v))
    }

    pub fn flip(&mut self, v: usize) {
        self.spins[v] = -self.spins[v];
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    /// Sum of `s(v)s(v')` over every periodic bond, each counted once.
    pub fn bond_sum(&self) -> i64 {
        (0..self.len())
            .map(|v| {
                let s = self.spins[v] as i64;
                s * (self.spins[self.neighbor(v, Direction::Right)] as i64
                    + self.spins[self.neighbor(v, Direction::Down)] as i64)
            })
            .sum()
    }

    pub fn total_energy(&self, params: &ModelParams) -> f64 {
        -params.j * self.bond_sum() as f64 - params.h * self.magnetization() as f64
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width < 3 || height < 3 {
        Err(Error::InvalidDimension { width, height })
    } else {
        Ok(())
    }
}
