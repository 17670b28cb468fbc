//! Dense complex linear algebra and the small convex solvers used by the
//! beamforming and phase-shift steps.

pub mod linalg;
pub mod lmi;
pub mod qcqp;
pub mod randomize;
pub mod sdp_log;

pub use linalg::{c, cr, hermitian_eig, max_generalized_eigvec, pseudo_inverse, CMat, CVec, C64};
pub use lmi::{solve_lmi_qp, LmiQpProblem, LmiQpSolution};
pub use qcqp::{solve_convex_qcqp, ConvexQcqpProblem, QcqpSolution, QuadVsLin};
pub use randomize::gaussian_randomize;
pub use sdp_log::{solve_diag_sdp_log, DiagSdpLogProblem, SdpLogSolution};

/// Default tolerance for every subproblem solver.
pub const DEFAULT_TOL: f64 = 1e-8;
