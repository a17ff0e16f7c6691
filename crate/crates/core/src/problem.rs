//! Discrete transport problems: two atomic marginals of equal total mass on a
//! common domain, plus the diffusivity `ε`.
//!
//! Throughout the crate the scaling `a` lives on the support of `mu0` and
//! enforces `mass0` (row sums of the plan); `b` lives on the support of `mu1`
//! and enforces `mass1` (column sums).

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel_matrix, DomainSpec, KernelOperator, DEFAULT_IMAGE_COUNT};

/// Relative tolerance on `|Σ mass0 − Σ mass1|`.
pub const MASS_BALANCE_RTOL: f64 = 1e-12;

/// Weighted point cloud `Σ wᵢ δ_{xᵢ}`; points are the rows of `points`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    pub points: Array2<f64>,
    pub weights: Array1<f64>,
}

impl AtomicMeasure {
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let m = Self { points, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.nrows() == 0 {
            return Err(Error::EmptyPointSet);
        }
        if self.points.nrows() != self.weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} weights",
                self.points.nrows(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.sum()
    }
}

/// A validated discrete transport problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub domain: DomainSpec,
    pub mu0: AtomicMeasure,
    pub mu1: AtomicMeasure,
    pub epsilon: f64,
}

/// Checks marginals, domain and `ε`. Weights are never renormalized.
pub fn validate_problem(
    domain: DomainSpec,
    mu0: AtomicMeasure,
    mu1: AtomicMeasure,
    epsilon: f64,
) -> Result<ProblemInstance> {
    domain.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    mu0.validate()?;
    mu1.validate()?;
    for m in [&mu0, &mu1] {
        if m.points.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: m.points.ncols(),
            });
        }
        if m.points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
    }
    let (m0, m1) = (mu0.total_mass(), mu1.total_mass());
    if (m0 - m1).abs() > MASS_BALANCE_RTOL * m0 {
        return Err(Error::Unbalanced {
            mass0: m0,
            mass1: m1,
        });
    }
    Ok(ProblemInstance {
        domain,
        mu0,
        mu1,
        epsilon,
    })
}

impl ProblemInstance {
    pub fn kernel(&self) -> Result<KernelOperator> {
        build_kernel_matrix(&self.domain, self.epsilon, &self.mu0.points, &self.mu1.points)
    }

    pub fn mass0(&self) -> &Array1<f64> {
        &self.mu0.weights
    }

    pub fn mass1(&self) -> &Array1<f64> {
        &self.mu1.weights
    }

    /// The same problem with the roles of the marginals exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            domain: self.domain.clone(),
            mu0: self.mu1.clone(),
            mu1: self.mu0.clone(),
            epsilon: self.epsilon,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProblemJson = serde_json::from_str(s)?;
        raw.into_problem()
    }

    pub fn to_json(&self) -> ProblemJson {
        ProblemJson::from_problem(self)
    }
}

/// Random test problem: `n` uniform points per marginal in the unit box (or
/// the fundamental torus cell), positive weights normalized to unit mass.
pub fn random_instance(seed: u64, n: usize, domain: &DomainSpec, epsilon: f64) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = domain.dim();
    let extent: Vec<f64> = match domain {
        DomainSpec::Euclidean { .. } => vec![1.0; dim],
        DomainSpec::FlatTorus { periods, .. } => periods.clone(),
    };
    let measure = |rng: &mut ChaCha8Rng| {
        let points = Array2::from_shape_fn((n, dim), |(_, d)| rng.gen::<f64>() * extent[d]);
        let raw = Array1::from_shape_fn(n, |_| rng.gen_range(0.1..1.0));
        let total = raw.sum();
        AtomicMeasure {
            points,
            weights: raw / total,
        }
    };
    let mu0 = measure(&mut rng);
    let mu1 = measure(&mut rng);
    validate_problem(domain.clone(), mu0, mu1, epsilon)
}

/// Wire form of the domain: `{"kind": ..., "dim": d, "periods": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainJson {
    pub kind: DomainKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_count: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    #[serde(alias = "euclidean")]
    Euclidean,
    #[serde(alias = "flat_torus", alias = "torus")]
    FlatTorus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Wire form of a problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemJson {
    pub domain: DomainJson,
    pub epsilon: f64,
    pub mu0: MeasureJson,
    pub mu1: MeasureJson,
}

impl DomainJson {
    pub fn into_domain(self) -> Result<DomainSpec> {
        match self.kind {
            DomainKind::Euclidean => DomainSpec::euclidean(self.dim),
            DomainKind::FlatTorus => {
                let periods = self
                    .periods
                    .ok_or_else(|| Error::InvalidDomain("FlatTorus requires periods".into()))?;
                if periods.len() != self.dim {
                    return Err(Error::InvalidDomain(format!(
                        "dim {} but {} periods",
                        self.dim,
                        periods.len()
                    )));
                }
                DomainSpec::flat_torus(periods, self.image_count.unwrap_or(DEFAULT_IMAGE_COUNT))
            }
        }
    }

    pub fn from_domain(d: &DomainSpec) -> Self {
        match d {
            DomainSpec::Euclidean { dim } => Self {
                kind: DomainKind::Euclidean,
                dim: *dim,
                periods: None,
                image_count: None,
            },
            DomainSpec::FlatTorus {
                periods,
                image_count,
            } => Self {
                kind: DomainKind::FlatTorus,
                dim: periods.len(),
                periods: Some(periods.clone()),
                image_count: Some(*image_count),
            },
        }
    }
}

impl MeasureJson {
    fn into_measure(self, dim: usize) -> Result<AtomicMeasure> {
        let n = self.points.len();
        if n == 0 {
            return Err(Error::EmptyPointSet);
        }
        let mut flat = Vec::with_capacity(n * dim);
        for p in &self.points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        let points = Array2::from_shape_vec((n, dim), flat)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        AtomicMeasure::new(points, Array1::from(self.weights))
    }

    fn from_measure(m: &AtomicMeasure) -> Self {
        Self {
            points: m.points.rows().into_iter().map(|r| r.to_vec()).collect(),
            weights: m.weights.to_vec(),
        }
    }
}

impl ProblemJson {
    pub fn into_problem(self) -> Result<ProblemInstance> {
        let domain = self.domain.into_domain()?;
        let dim = domain.dim();
        let mu0 = self.mu0.into_measure(dim)?;
        let mu1 = self.mu1.into_measure(dim)?;
        validate_problem(domain, mu0, mu1, self.epsilon)
    }

    pub fn from_problem(p: &ProblemInstance) -> Self {
        Self {
            domain: DomainJson::from_domain(&p.domain),
            epsilon: p.epsilon,
            mu0: MeasureJson::from_measure(&p.mu0),
            mu1: MeasureJson::from_measure(&p.mu1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line(points: &[f64], weights: &[f64]) -> AtomicMeasure {
        AtomicMeasure {
            points: Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap(),
            weights: Array1::from(weights.to_vec()),
        }
    }

    #[test]
    fn unit_masses_validate() {
        let d = DomainSpec::euclidean(1).unwrap();
        assert!(validate_problem(d, line(&[0.0], &[1.0]), line(&[1.0], &[1.0]), 0.1).is_ok());
    }

    #[test]
    fn unbalanced_rejected() {
        let d = DomainSpec::euclidean(1).unwrap();
        let err = validate_problem(
            d,
            line(&[0.0, 1.0], &[0.5, 0.5]),
            line(&[0.0, 1.0], &[0.3, 0.3]),
            0.1,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("unbalanced problem"));
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let d = DomainSpec::euclidean(1).unwrap();
        let err = validate_problem(
            d.clone(),
            line(&[0.0, 1.0, 2.0], &[0.5, -0.1, 0.6]),
            line(&[0.0], &[1.0]),
            0.1,
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "weights must be strictly positive");
        assert!(validate_problem(d, line(&[0.0, 1.0], &[1.0, 0.0]), line(&[0.0], &[1.0]), 0.1).is_err());
    }

    #[test]
    fn epsilon_rejected() {
        let d = DomainSpec::euclidean(1).unwrap();
        let err = validate_problem(d, line(&[0.0], &[1.0]), line(&[1.0], &[1.0]), 0.0).unwrap_err();
        assert!(err.to_string().contains("epsilon must be positive"));
    }

    #[test]
    fn validation_is_idempotent() {
        let d = DomainSpec::euclidean(2).unwrap();
        let p = random_instance(3, 6, &d, 0.1).unwrap();
        let again = validate_problem(p.domain.clone(), p.mu0.clone(), p.mu1.clone(), p.epsilon).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn random_is_deterministic_and_valid() {
        let d = DomainSpec::flat_torus(vec![1.0, 2.0], 5).unwrap();
        let a = random_instance(42, 50, &d, 0.05).unwrap();
        let b = random_instance(42, 50, &d, 0.05).unwrap();
        assert_eq!(a, b);
        assert!((a.mu0.total_mass() - 1.0).abs() < 1e-14);
        assert!(a.mu1.points.column(1).iter().all(|&y| (0.0..2.0).contains(&y)));
        let c = random_instance(43, 50, &d, 0.05).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_atom_weights_are_exactly_one() {
        let d = DomainSpec::euclidean(3).unwrap();
        let p = random_instance(9, 1, &d, 0.2).unwrap();
        assert_eq!(p.mu0.weights, array![1.0]);
        assert_eq!(p.mu1.weights, array![1.0]);
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"domain": {"kind": "FlatTorus", "dim": 1, "periods": [1.0]},
                    "epsilon": 0.05,
                    "mu0": {"points": [[0.1], [0.4]], "weights": [0.5, 0.5]},
                    "mu1": {"points": [[0.7]], "weights": [1.0]}}"#;
        let p = ProblemInstance::from_json_str(s).unwrap();
        assert_eq!(p.domain, DomainSpec::flat_torus(vec![1.0], DEFAULT_IMAGE_COUNT).unwrap());
        let back = serde_json::to_string(&p.to_json()).unwrap();
        assert_eq!(ProblemInstance::from_json_str(&back).unwrap(), p);
    }

    #[test]
    fn json_shape_errors() {
        let bad_dim = r#"{"domain": {"kind": "Euclidean", "dim": 2}, "epsilon": 0.1,
                    "mu0": {"points": [[0.1]], "weights": [1.0]},
                    "mu1": {"points": [[0.7, 0.1]], "weights": [1.0]}}"#;
        assert!(ProblemInstance::from_json_str(bad_dim).is_err());
        let no_periods = r#"{"domain": {"kind": "FlatTorus", "dim": 1}, "epsilon": 0.1,
                    "mu0": {"points": [[0.1]], "weights": [1.0]},
                    "mu1": {"points": [[0.7]], "weights": [1.0]}}"#;
        assert!(ProblemInstance::from_json_str(no_periods).is_err());
    }
}
