//! Numerical laboratory for derived-from-Anosov suspension flows: the blown-up
//! toral map and its lifts, the Solv-type pulled-back metric, transverse tube
//! plugs with their boundary foliations, anisotropic grid distance solvers,
//! the hyperbolic-plane geodesic flow benchmark, quasigeodesic constant
//! estimation, and plug gluing.

pub mod config;
pub mod da;
pub mod dist;
pub mod geoflow;
pub mod glue;
pub mod metric;
pub mod plug;
pub mod qg;

pub use da::{BlowupProfile, Chart, DaMap, DaMode, Deck, LatticeAutomorphism};
pub use metric::{BlownUpMetric, Metric, Point3, Polyline3, SolvMetric};
