//! Coordinate state spaces.
//!
//! A [`CoordinateSpace`] is a finite product of per-coordinate domains,
//! enumerated in lexicographic order (coordinate 0 most significant). An
//! [`ExplicitSpace`] is a finite multiset of coordinate vectors; it carries
//! duplicated states and coordinate presentations of subdomains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct CoordinateSpace {
    domains: Vec<u32>,
}

impl CoordinateSpace {
    pub fn new(domains: Vec<u32>) -> Result<Self> {
        if let Some(i) = domains.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!(
                "coordinate {i} has an empty domain"
            )));
        }
        Ok(Self { domains })
    }

    pub fn binary(d: usize) -> Self {
        Self {
            domains: vec![2; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn is_binary(&self) -> bool {
        self.domains.iter().all(|&c| c == 2)
    }

    /// Product of the domain sizes, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        self.domains
            .iter()
            .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
            .unwrap_or(u128::MAX)
    }

    fn stride(&self, i: usize) -> usize {
        self.domains[i + 1..].iter().map(|&c| c as usize).product()
    }

    pub fn coord(&self, rank: usize, i: usize) -> u32 {
        ((rank / self.stride(i)) % self.domains[i] as usize) as u32
    }

    pub fn decode(&self, mut rank: usize) -> Vec<u32> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            let c = self.domains[i] as usize;
            out[i] = (rank % c) as u32;
            rank /= c;
        }
        out
    }

    pub fn encode(&self, coords: &[u32]) -> Result<usize> {
        if coords.len() != self.dim() {
            return Err(Error::Domain(format!(
                "state has {} coordinates, space has {}",
                coords.len(),
                self.dim()
            )));
        }
        let mut rank = 0usize;
        for (i, (&v, &c)) in coords.iter().zip(&self.domains).enumerate() {
            if v >= c {
                return Err(Error::Domain(format!(
                    "coordinate {i} value {v} outside domain of size {c}"
                )));
            }
            rank = rank * c as usize + v as usize;
        }
        Ok(rank)
    }
}

impl TryFrom<Vec<u32>> for CoordinateSpace {
    type Error = Error;
    fn try_from(domains: Vec<u32>) -> Result<Self> {
        Self::new(domains)
    }
}

impl From<CoordinateSpace> for Vec<u32> {
    fn from(space: CoordinateSpace) -> Self {
        space.domains
    }
}

/// A finite list of states given by explicit coordinate vectors. Repeated
/// vectors are allowed and denote duplicated states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExplicitSpace {
    domains: Vec<u32>,
    states: Vec<Vec<u32>>,
}

impl ExplicitSpace {
    pub fn new(domains: Vec<u32>, states: Vec<Vec<u32>>) -> Result<Self> {
        CoordinateSpace::new(domains.clone())?;
        for (k, s) in states.iter().enumerate() {
            if s.len() != domains.len() {
                return Err(Error::Validation(format!(
                    "state {k} has {} coordinates, expected {}",
                    s.len(),
                    domains.len()
                )));
            }
            if let Some(i) = s.iter().zip(&domains).position(|(&v, &c)| v >= c) {
                return Err(Error::Validation(format!(
                    "state {k} coordinate {i} outside its domain"
                )));
            }
        }
        Ok(Self { domains, states })
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }
}

/// State carrier of a decision problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateSpace {
    Product(CoordinateSpace),
    Explicit(ExplicitSpace),
}

impl StateSpace {
    pub fn dim(&self) -> usize {
        self.domains().len()
    }

    pub fn domains(&self) -> &[u32] {
        match self {
            StateSpace::Product(p) => p.domains(),
            StateSpace::Explicit(e) => e.domains(),
        }
    }

    pub fn state_count(&self) -> u128 {
        match self {
            StateSpace::Product(p) => p.state_count(),
            StateSpace::Explicit(e) => e.states.len() as u128,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, StateSpace::Product(_))
    }

    pub fn is_binary(&self) -> bool {
        self.domains().iter().all(|&c| c == 2)
    }

    pub fn coord(&self, state: usize, i: usize) -> u32 {
        match self {
            StateSpace::Product(p) => p.coord(state, i),
            StateSpace::Explicit(e) => e.states[state][i],
        }
    }

    pub fn coords(&self, state: usize) -> Vec<u32> {
        match self {
            StateSpace::Product(p) => p.decode(state),
            StateSpace::Explicit(e) => e.states[state].clone(),
        }
    }

    /// State label used in reports: digit string when every domain has at
    /// most ten values, otherwise a parenthesised tuple.
    pub fn label(&self, state: usize) -> String {
        let coords = self.coords(state);
        if self.domains().iter().all(|&c| c <= 10) {
            coords.iter().map(|v| char::from(b'0' + *v as u8)).collect()
        } else {
            let parts: Vec<String> = coords.iter().map(u32::to_string).collect();
            format!("({})", parts.join(","))
        }
    }
}
