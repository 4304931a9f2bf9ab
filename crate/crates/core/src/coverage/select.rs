//! Component selection distributions and seeded sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::CoverageGraph;
use crate::index::ComponentIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    #[default]
    CoverageWeighted,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::CoverageWeighted => "coverage_weighted",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("coverage-weighted selection needs a graph with at least one edge")]
    DegenerateGraph,
    #[error("coverage-weighted selection needs a coverage graph")]
    MissingGraph,
    #[error("no components to select from")]
    Empty,
}

/// Probability of selecting each component, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDistribution {
    pub strategy: Strategy,
    pub weights: Vec<(String, f64)>,
}

pub fn make_distribution(
    index: &ComponentIndex,
    graph: Option<&CoverageGraph>,
    strategy: Strategy,
) -> Result<SelectionDistribution, SelectionError> {
    if index.is_empty() {
        return Err(SelectionError::Empty);
    }
    let weights = match strategy {
        Strategy::Uniform => {
            let p = 1.0 / index.len() as f64;
            index.components().iter().map(|c| (c.id.clone(), p)).collect()
        }
        Strategy::CoverageWeighted => {
            let graph = graph.ok_or(SelectionError::MissingGraph)?;
            let degrees = graph.degrees();
            let deg: Vec<usize> = index
                .components()
                .iter()
                .map(|c| degrees.get(c.id.as_str()).copied().unwrap_or(0))
                .collect();
            let total: usize = deg.iter().sum();
            if total == 0 {
                return Err(SelectionError::DegenerateGraph);
            }
            index
                .components()
                .iter()
                .zip(deg)
                .map(|(c, d)| (c.id.clone(), d as f64 / total as f64))
                .collect()
        }
    };
    Ok(SelectionDistribution { strategy, weights })
}

impl SelectionDistribution {
    pub fn weight(&self, id: &str) -> Option<f64> {
        self.weights.iter().find(|(c, _)| c == id).map(|(_, w)| *w)
    }

    pub fn sampler(&self) -> Sampler<'_> {
        let w: Vec<f64> = self.weights.iter().map(|(_, w)| *w).collect();
        Sampler {
            dist: self,
            index: WeightedIndex::new(&w).expect("weights are non-negative with positive sum"),
        }
    }
}

/// Repeated draws from one distribution.
pub struct Sampler<'a> {
    dist: &'a SelectionDistribution,
    index: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &'a str {
        &self.dist.weights[self.index.sample(rng)].0
    }
}

/// One reproducible draw.
pub fn sample_component(dist: &SelectionDistribution, seed: u64) -> &str {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dist.sampler().draw(&mut rng)
}
