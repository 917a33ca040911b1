//! Reward functions over states, with time-based discounting.

use thiserror::Error;

use crate::actions::State;
use crate::fingerprint::{morgan_fingerprint, tanimoto, BitFingerprint, SIMILARITY_RADIUS};
use crate::molgraph::Molecule;
use crate::properties::{Properties, PropertyError, PropertyKind};

const SIMILARITY_LENGTH: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("invalid reward spec: {0}")]
    InvalidSpec(String),
    #[error("relative improvement undefined: baseline property is already 1")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardVariant {
    Maximize {
        property: PropertyKind,
    },
    TargetRange {
        property: PropertyKind,
        lower: f64,
        upper: f64,
    },
    /// Penalized logP, pulled down by `lambda * (delta - sim)` whenever the
    /// similarity to `origin` falls below `delta`.
    ConstrainedLogP {
        origin: Molecule,
        delta: f64,
        lambda: f64,
    },
    /// `weight * sim(origin) + (1 - weight) * property`.
    MultiObjective {
        origin: Molecule,
        weight: f64,
        property: PropertyKind,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub variant: RewardVariant,
    pub gamma: f64,
    pub per_step: bool,
}

impl RewardSpec {
    pub fn new(variant: RewardVariant) -> Self {
        RewardSpec {
            variant,
            gamma: 0.9,
            per_step: true,
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |m: String| Err(RewardError::InvalidSpec(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        match &self.variant {
            RewardVariant::Maximize { .. } => {}
            RewardVariant::TargetRange { lower, upper, .. } => {
                if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
                    return bad(format!("range [{lower}, {upper}] is empty or not finite"));
                }
            }
            RewardVariant::ConstrainedLogP { delta, lambda, .. } => {
                if !(0.0..=1.0).contains(delta) {
                    return bad(format!("delta {delta} outside [0, 1]"));
                }
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("lambda {lambda} must be non-negative"));
                }
            }
            RewardVariant::MultiObjective { weight, .. } => {
                if !(0.0..=1.0).contains(weight) {
                    return bad(format!("weight {weight} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn origin(&self) -> Option<&Molecule> {
        match &self.variant {
            RewardVariant::ConstrainedLogP { origin, .. } | RewardVariant::MultiObjective { origin, .. } => {
                Some(origin)
            }
            _ => None,
        }
    }

    /// Same spec with a different origin molecule (no-op for variants without one).
    pub fn with_origin(&self, new_origin: Molecule) -> RewardSpec {
        let mut spec = self.clone();
        match &mut spec.variant {
            RewardVariant::ConstrainedLogP { origin, .. } | RewardVariant::MultiObjective { origin, .. } => {
                *origin = new_origin
            }
            _ => {}
        }
        spec
    }
}

/// 1 inside `[lower, upper]`, minus the distance to the nearer bound outside.
pub fn target_range_reward(p: f64, lower: f64, upper: f64) -> f64 {
    if p >= lower && p <= upper {
        1.0
    } else {
        -(p - lower).abs().min((p - upper).abs())
    }
}

pub fn similarity_fingerprint(mol: &Molecule) -> BitFingerprint {
    morgan_fingerprint(mol, SIMILARITY_RADIUS, SIMILARITY_LENGTH)
}

pub fn similarity(a: &Molecule, b: &Molecule) -> f64 {
    tanimoto(&similarity_fingerprint(a), &similarity_fingerprint(b)).expect("same length")
}

pub fn constrained_penalty(sim: f64, delta: f64, lambda: f64) -> f64 {
    if sim < delta {
        lambda * (delta - sim)
    } else {
        0.0
    }
}

pub fn scalarize(weight: f64, sim: f64, prop: f64) -> f64 {
    weight * sim + (1.0 - weight) * prop
}

/// Dot product of a weight vector with a reward vector.
pub fn scalarize_vector(weights: &[f64], rewards: &RewardVector) -> f64 {
    assert_eq!(weights.len(), rewards.components.len(), "weight and reward lengths differ");
    weights.iter().zip(&rewards.components).map(|(w, r)| w * r).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    pub components: Vec<f64>,
}

pub fn relative_improvement(p: f64, p0: f64) -> Result<f64, RewardError> {
    if p0 == 1.0 {
        return Err(RewardError::DivisionByZero);
    }
    Ok((p - p0) / (1.0 - p0))
}

/// A spec bound to its property calculators and cached origin fingerprint.
#[derive(Debug, Clone)]
pub struct RewardFn {
    spec: RewardSpec,
    props: Properties,
    origin_fp: Option<BitFingerprint>,
}

impl RewardFn {
    pub fn new(spec: RewardSpec, props: Properties) -> Result<Self, RewardError> {
        spec.validate()?;
        let origin_fp = spec.origin().map(similarity_fingerprint);
        Ok(RewardFn { spec, props, origin_fp })
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn properties(&self) -> &Properties {
        &self.props
    }

    pub fn with_origin(&self, origin: Molecule) -> RewardFn {
        RewardFn::new(self.spec.with_origin(origin), self.props.clone()).expect("already validated")
    }

    /// Tanimoto similarity to the origin, if the spec has one.
    pub fn origin_similarity(&self, mol: &Molecule) -> Option<f64> {
        self.origin_fp
            .as_ref()
            .map(|o| tanimoto(&similarity_fingerprint(mol), o).expect("same length"))
    }

    /// Objective components before scalarization (one entry per objective).
    pub fn reward_vector(&self, mol: &Molecule) -> Result<RewardVector, RewardError> {
        let components = match &self.spec.variant {
            RewardVariant::MultiObjective { property, .. } => {
                vec![self.origin_similarity(mol).expect("origin present"), self.props.evaluate(property, mol)?]
            }
            _ => vec![self.raw(mol)?],
        };
        Ok(RewardVector { components })
    }

    /// Undiscounted reward of a molecule.
    pub fn raw(&self, mol: &Molecule) -> Result<f64, RewardError> {
        Ok(match &self.spec.variant {
            RewardVariant::Maximize { property } => self.props.evaluate(property, mol)?,
            RewardVariant::TargetRange { property, lower, upper } => {
                target_range_reward(self.props.evaluate(property, mol)?, *lower, *upper)
            }
            RewardVariant::ConstrainedLogP { delta, lambda, .. } => {
                let base = self.props.evaluate(&PropertyKind::PenalizedLogP, mol)?;
                let sim = self.origin_similarity(mol).expect("origin present");
                base - constrained_penalty(sim, *delta, *lambda)
            }
            RewardVariant::MultiObjective { weight, property, .. } => {
                let sim = self.origin_similarity(mol).expect("origin present");
                scalarize(*weight, sim, self.props.evaluate(property, mol)?)
            }
        })
    }

    /// Discount factor `gamma^(T - t)`, or 0 before the horizon when only
    /// final rewards are given.
    pub fn discount(&self, step: usize, max_steps: usize) -> f64 {
        if !self.spec.per_step && step < max_steps {
            return 0.0;
        }
        self.spec.gamma.powi(max_steps.saturating_sub(step) as i32)
    }

    pub fn step_reward(&self, state: &State, max_steps: usize) -> Result<f64, RewardError> {
        let d = self.discount(state.step, max_steps);
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(self.raw(&state.molecule)? * d)
    }
}

pub fn step_reward(spec: &RewardSpec, props: &Properties, state: &State, max_steps: usize) -> Result<f64, RewardError> {
    RewardFn::new(spec.clone(), props.clone())?.step_reward(state, max_steps)
}
