//! Machine-readable analysis reports and the full pipeline.
//!
//! `run_analyze` chains the workbench: steadiness residual, critical-set
//! classification, flux extraction with endpoint fits, moving-plane
//! symmetry, and the final classification. Every tolerance that shaped a
//! verdict is echoed into the report so downstream assertions can use the
//! same numbers the run did.

use crate::calculus::steady_residual;
use crate::critical::{
    analyze_critical_set, detect_local_radiality, innermost_loop, ComponentKind,
    RadialityVerdict,
};
use crate::error::Result;
use crate::field::FieldRef;
use crate::flux::{
    analyze_flux, fit_puiseux, verify_flux_residual, EndpointSide, FluxVerdict, PuiseuxSeries,
};
use crate::moving_plane::{symmetry_verdict, GlobalVerdict, SweepRegion};
use serde::Serialize;

/// Steadiness threshold on the sup bracket residual.
pub const STEADY_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    /// Hash of the field spec string (filled by the CLI).
    pub spec_hash: Option<String>,
    pub resolution: usize,
    pub timestamp_unix: Option<u64>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub steady_threshold: f64,
    pub tol_branch: f64,
    pub flux_residual_threshold: f64,
    pub tol_center: f64,
    pub tol_mp_rel: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadySection {
    pub sup_residual: f64,
    pub l2_residual: f64,
    pub threshold: f64,
    pub is_steady: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentSummary {
    pub kind: String,
    pub degree: Option<usize>,
    pub constant_degree: bool,
    pub anomalous: bool,
    pub closed: bool,
    pub points: usize,
    pub level: f64,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalSection {
    pub components: Vec<ComponentSummary>,
    pub isolated_points: usize,
    pub curves: usize,
    pub regions: usize,
    pub no_critical_curves: bool,
    pub innermost_cell_area: Option<f64>,
    pub cells: usize,
    pub radial_cells: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxSection {
    pub verdict: String,
    pub range: (f64, f64),
    pub tol_branch: f64,
    pub max_across_spread: f64,
    pub max_within_spread: f64,
    pub levels_used: usize,
    pub levels_skipped: usize,
    pub residual_sup: Option<f64>,
    pub residual_coverage: Option<f64>,
    pub puiseux_min: Option<PuiseuxSummary>,
    pub puiseux_max: Option<PuiseuxSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PuiseuxSummary {
    pub k0: usize,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub leading_negative: bool,
    pub holder_exponent: Option<f64>,
    pub analytic: bool,
}

impl From<&PuiseuxSeries> for PuiseuxSummary {
    fn from(p: &PuiseuxSeries) -> Self {
        PuiseuxSummary {
            k0: p.k0,
            exponents: p.exponents.clone(),
            coefficients: p.coefficients.clone(),
            residual: p.residual,
            leading_negative: p.leading_negative,
            holder_exponent: p.holder_exponent,
            analytic: p.analytic,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MovingPlaneSection {
    pub verdict: String,
    pub center: Option<(f64, f64)>,
    pub center_error: Option<f64>,
    pub symmetric_directions: usize,
    pub total_directions: usize,
    /// (ex, ey, lambda_mid) of the symmetric axes.
    pub axes: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub radial: bool,
    pub semilinear: bool,
    pub branch_discrepancy: bool,
    pub non_steady: bool,
    pub inconclusive: bool,
    pub label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub meta: ReportMeta,
    pub field: String,
    pub steady: SteadySection,
    pub critical_set: Option<CriticalSection>,
    pub flux: Option<FluxSection>,
    pub moving_plane: Option<MovingPlaneSection>,
    pub classification: Classification,
}

impl AnalysisReport {
    /// Process exit code under the documented contract: 0 ok, 2 non-steady,
    /// 3 inconclusive.
    pub fn exit_code(&self) -> i32 {
        if self.classification.non_steady {
            2
        } else if self.classification.inconclusive {
            3
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AnalyzeOptions {
    pub resolution: usize,
    pub directions: usize,
    pub lambda_count: usize,
    /// Run the flux/moving-plane stages even when the field is not steady.
    pub force: bool,
    pub with_moving_plane: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            resolution: 256,
            directions: 16,
            lambda_count: 96,
            force: false,
            with_moving_plane: true,
        }
    }
}

/// Run the whole pipeline on one field.
pub fn run_analyze(psi: &FieldRef, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let res = opts.resolution;
    let steady = steady_residual(psi, res);
    let is_steady = steady.sup_residual <= STEADY_THRESHOLD;
    let steady_section = SteadySection {
        sup_residual: steady.sup_residual,
        l2_residual: steady.l2_residual,
        threshold: STEADY_THRESHOLD,
        is_steady,
    };

    // critical set (at a resolution that keeps tracing affordable)
    let cs_res = res.min(192);
    let analysis = analyze_critical_set(psi.as_ref(), cs_res)?;
    let mut critical_values: Vec<f64> = analysis.components.iter().map(|c| c.level).collect();
    critical_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    critical_values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let decomposition = innermost_loop(&analysis, psi.domain()).ok();
    let critical_section = {
        let comps: Vec<ComponentSummary> = analysis
            .components
            .iter()
            .map(|c| ComponentSummary {
                kind: format!("{:?}", c.kind),
                degree: c.degree,
                constant_degree: c.constant_degree,
                anomalous: c.anomalous,
                closed: c.closed,
                points: c.polyline.len(),
                level: c.level,
                length: c.length(),
            })
            .collect();
        let isolated = analysis
            .components
            .iter()
            .filter(|c| c.kind == ComponentKind::IsolatedPoint)
            .count();
        let curves = analysis
            .components
            .iter()
            .filter(|c| matches!(c.kind, ComponentKind::Arc | ComponentKind::Loop))
            .count();
        let regions = analysis
            .components
            .iter()
            .filter(|c| c.kind == ComponentKind::Region)
            .count();
        let (no_curves, inner_area, n_cells, radial_cells) = match &decomposition {
            Some(d) => {
                let radial = detect_local_radiality(psi.as_ref(), &analysis, d)
                    .iter()
                    .filter(|v| matches!(v.verdict, RadialityVerdict::Radial { .. }))
                    .count();
                (
                    d.no_critical_curves,
                    d.innermost.map(|i| d.cells[i].area),
                    d.cells.len(),
                    radial,
                )
            }
            None => (false, None, 0, 0),
        };
        CriticalSection {
            components: comps,
            isolated_points: isolated,
            curves,
            regions,
            no_critical_curves: no_curves,
            innermost_cell_area: inner_area,
            cells: n_cells,
            radial_cells,
        }
    };

    // flux stage
    let mut tol_branch = crate::flux::branch_tolerance(steady.sup_residual);
    let flux_threshold = (100.0 * steady.sup_residual).max(1e-6);
    let mut flux_section = None;
    let mut semilinear = false;
    let mut branch_discrepancy = false;
    if is_steady || opts.force {
        if let Ok((samples, flux)) = analyze_flux(psi, res, &critical_values, steady.sup_residual)
        {
            tol_branch = flux.tol_branch;
            let single = flux.verdict == FluxVerdict::SingleValued;
            branch_discrepancy = !single;
            let (residual_sup, coverage) = if single {
                match verify_flux_residual(psi, &flux, res) {
                    Ok(r) => {
                        semilinear = r.sup <= flux_threshold;
                        (Some(r.sup), Some(r.coverage))
                    }
                    Err(_) => (None, None),
                }
            } else {
                (None, None)
            };
            let pmin = fit_puiseux(&flux, EndpointSide::Min, 4).ok();
            let pmax = fit_puiseux(&flux, EndpointSide::Max, 4).ok();
            flux_section = Some(FluxSection {
                verdict: match flux.verdict {
                    FluxVerdict::SingleValued => "single-valued".into(),
                    FluxVerdict::BranchDiscrepancy => "branch-discrepancy".into(),
                },
                range: flux.range,
                tol_branch: flux.tol_branch,
                max_across_spread: flux.max_across_spread,
                max_within_spread: flux.max_within_spread,
                levels_used: samples.samples.len(),
                levels_skipped: samples.skipped.len(),
                residual_sup,
                residual_coverage: coverage,
                puiseux_min: pmin.as_ref().map(PuiseuxSummary::from),
                puiseux_max: pmax.as_ref().map(PuiseuxSummary::from),
            });
        }
    }

    // moving plane stage (bounded domains only)
    let mut mp_section = None;
    let mut radial = false;
    if opts.with_moving_plane && (is_steady || opts.force) {
        if let Ok(region) = SweepRegion::from_domain(psi.domain()) {
            if let Ok(rep) = symmetry_verdict(psi, &region, opts.directions, opts.lambda_count) {
                let axes: Vec<(f64, f64, f64)> = rep
                    .directions
                    .iter()
                    .filter(|d| d.symmetric)
                    .map(|d| (d.direction.0, d.direction.1, d.lambda_mid))
                    .collect();
                let symmetric = axes.len();
                let (verdict, center, center_error) = match rep.verdict {
                    GlobalVerdict::Radial { center, center_error } => {
                        radial = true;
                        ("radial".to_string(), Some(center), Some(center_error))
                    }
                    GlobalVerdict::AxisSymmetric { .. } => {
                        ("axis-symmetric".to_string(), None, None)
                    }
                    GlobalVerdict::Asymmetric => ("asymmetric".to_string(), None, None),
                };
                mp_section = Some(MovingPlaneSection {
                    verdict,
                    center,
                    center_error,
                    symmetric_directions: symmetric,
                    total_directions: rep.directions.len(),
                    axes,
                });
            }
        }
    }

    let inconclusive = is_steady && !radial && !semilinear && !branch_discrepancy;
    let label = if !is_steady {
        "non-steady".to_string()
    } else {
        let mut parts = Vec::new();
        if radial {
            parts.push("radial");
        }
        if semilinear {
            parts.push("semilinear");
        }
        if branch_discrepancy {
            parts.push("branch-discrepancy");
        }
        if parts.is_empty() {
            parts.push("inconclusive");
        }
        parts.join("+")
    };
    Ok(AnalysisReport {
        meta: ReportMeta {
            tool: "steady2d".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            spec_hash: None,
            resolution: res,
            timestamp_unix: None,
            tolerances: Tolerances {
                steady_threshold: STEADY_THRESHOLD,
                tol_branch,
                flux_residual_threshold: flux_threshold,
                tol_center: crate::moving_plane::TOL_CENTER,
                tol_mp_rel: crate::moving_plane::TOL_MP_REL,
            },
        },
        field: psi.name(),
        steady: steady_section,
        critical_set: Some(critical_section),
        flux: flux_section,
        moving_plane: mp_section,
        classification: Classification {
            radial,
            semilinear,
            branch_discrepancy,
            non_steady: !is_steady,
            inconclusive,
            label,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Params};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn radial_poly_classifies_radial_and_semilinear() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let rep = run_analyze(&f, &AnalyzeOptions::default()).unwrap();
        assert!(rep.steady.is_steady);
        assert!(rep.classification.radial, "{:?}", rep.classification);
        assert!(rep.classification.semilinear, "{:?}", rep.classification);
        assert_eq!(rep.classification.label, "radial+semilinear");
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn sinsin_classifies_semilinear_with_linear_profile() {
        let f = catalog::field("sinsin", &Params::new()).unwrap() as FieldRef;
        let rep = run_analyze(&f, &AnalyzeOptions::default()).unwrap();
        assert!(rep.steady.is_steady);
        assert!(rep.classification.semilinear, "{:?}", rep.classification);
        assert!(!rep.classification.radial);
        assert_eq!(rep.exit_code(), 0);
        // linear F = -2 s: the endpoint fit must come out analytic
        let flux = rep.flux.unwrap();
        assert_eq!(flux.verdict, "single-valued");
        assert!(flux.puiseux_min.unwrap().analytic);
    }

    #[test]
    fn perturbed_field_flags_non_steady_exit_two() {
        let f = catalog::field("perturbed", &Params::new()).unwrap() as FieldRef;
        let rep = run_analyze(&f, &AnalyzeOptions::default()).unwrap();
        assert!(!rep.steady.is_steady);
        assert!(rep.classification.non_steady);
        assert_eq!(rep.exit_code(), 2);
    }

    #[test]
    fn report_serializes_deterministically() {
        let f = catalog::field("radial-poly", &params(&[("p", 2.0)])).unwrap() as FieldRef;
        let opts = AnalyzeOptions { directions: 8, lambda_count: 48, ..Default::default() };
        let a = serde_json::to_string(&run_analyze(&f, &opts).unwrap()).unwrap();
        let b = serde_json::to_string(&run_analyze(&f, &opts).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
