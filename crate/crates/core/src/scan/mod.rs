//! Parameter-plane analysis: grid scans, EP localization, PT-curve tracing and braiding.

pub mod braid;
pub mod curve;
pub mod ep;
pub mod grid;
pub mod result;
pub mod source;

pub use braid::{braid, circle_loop, repeat_loop, square_loop, BraidPoint, BraidTrace, Permutation};
pub use curve::{trace_pt_curve, CurvePoint, CurveTrace, TraceOptions, EPS_CURVE_FAMILY, EPS_CURVE_FIT};
pub use ep::{difference_map, locate_ep, lobe_structure, DiffPoint, EpEstimate, LobeReport};
pub use grid::ParamGrid;
pub use result::{write_points_csv, scan, scan_points, PointStatus, Provenance, ScanPoint, ScanResult, ScanSource};
pub use source::{gauge_tau, ParamSource, Sample, Windowed};
