//! Torsion, curvature and Schwarz-lemma diagnostics for Hermitian metrics on
//! coordinate charts.
//!
//! Conventions: the metric matrix `G[k][l]` is `g_{k lbar}`. Torsion is
//! `T^k_{ij} = g^{k lbar}(d_i g_{j lbar} - d_j g_{i lbar})` and curvature is
//! `R_{i jbar k lbar} = -d_i dbar_j g_{k lbar} + g^{p qbar} d_i g_{k qbar} dbar_j g_{p lbar}`.
//! Unitary frames come from the Cholesky factorization `G = L L^*`.

#![allow(clippy::needless_range_loop, clippy::should_implement_trait, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod chern;
pub mod error;
pub mod expr;
pub mod fd;
pub mod flow;
pub mod functionals;
pub mod gauduchon;
pub mod metric;
pub mod schwarz;
pub mod tensor;

pub use chern::{ChernPackage, FrameTag};
pub use error::{CurvError, Result};
pub use expr::{parse_expr, Expr, ParseError};
pub use fd::FdScheme;
pub use flow::{step_euler, thcf_velocity, Boundary, FlowState, GridMetricField, GridSpec};
pub use functionals::{estimate_extremum, BoundCertificate, BoundKind, FunctionalId, TauParam};
pub use gauduchon::{GauduchonPackage, GauduchonParam};
pub use metric::{eval_jet2, parse_metric_spec, Example22Params, MetricJet2, MetricSpec, Region};
pub use schwarz::{HoloMapSpec, SchwarzReport};
pub use tensor::{contract, psd_project, ComplexTensor, HermitianMatrix, PsdForm, UnitaryFrame, Variance, C64};
