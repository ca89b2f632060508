//! Certificates of unbounded objectives: explicit feasible sequences whose
//! objective values decrease without bound.

use crate::solution::SolutionFunction;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct WitnessElement {
    /// The driving parameter of this element (target level `d`, mixing
    /// weight `lambda`, ...).
    pub param: f64,
    pub objective: f64,
    pub solution: SolutionFunction,
}

/// A finite stretch of a feasibility-preserving sequence along which the
/// objective strictly decreases; extend the parameter grid to push the
/// objective arbitrarily low.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessSequence {
    pub description: String,
    pub elements: Vec<WitnessElement>,
}

impl WitnessSequence {
    pub fn objectives(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.objective).collect()
    }
}
