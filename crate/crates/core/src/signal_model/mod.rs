//! Signal priors, sensing operators and random problem instances.

mod instance;
mod operator;
mod prior;

pub use instance::{
    generate_instance, generate_k_sparse_instance, measurement_count, ProblemInstance,
};
pub use operator::{build_operator, DenseMatrix, MeasurementOperator, OperatorKind, PartialDct};
pub use prior::{sample_prior, Atom, PriorDistribution};

pub(crate) use operator::dot;
