use std::sync::Arc;
use std::time::Instant;
use steady2d::calculus::{laplacian, steady_residual};
use steady2d::field::FieldRef;
use steady2d::flux::*;
use steady2d::moving_plane::*;
use steady2d::tube::*;

fn main() {
    let curve = JordanCurve::build(&CurveSpec::ellipse(1.3, 0.8), 256).unwrap();
    let chart = build_fermi_chart(curve, 0.2).unwrap();
    let sol = Arc::new(solve_tube_series(&chart, (16, 64)).unwrap());
    let field = export_field(sol);
    let f: FieldRef = Arc::new(field.restricted(0.16));

    // moving plane over 16 directions
    let t0 = Instant::now();
    let region = SweepRegion::from_domain(f.domain()).unwrap();
    let rep = symmetry_verdict(&f, &region, 16, 96).unwrap();
    println!("verdict: {:?} [{:?}]", rep.verdict, t0.elapsed());
    for d in &rep.directions {
        println!(
            "  dir ({:+.3},{:+.3}) sym {} stop {:?} midline {:?}",
            d.direction.0, d.direction.1, d.symmetric, d.stop, d.midline_defect
        );
    }

    // flux branch analysis
    let t0 = Instant::now();
    let sup = steady_residual(&f, 128).sup_residual;
    let lap = laplacian(&f);
    let grid = steady2d::grid::sample_grid(f.as_ref(), (192, 192)).unwrap();
    let mut range = (f64::MAX, f64::MIN);
    for (i, v) in grid.values.iter().enumerate() {
        if grid.mask[i] && v.is_finite() { range = (range.0.min(*v), range.1.max(*v)); }
    }
    println!("psi range on |n|<=0.16: {range:?}, steady sup {sup:.2e}");
    let levels = default_levels(range);
    let samples = collect_pairs(&f, &lap, &levels, 256, &[0.0]).unwrap();
    let flux = extract_flux(&samples, branch_tolerance(sup)).unwrap();
    println!("verdict {:?} across {:.3e} within {:.3e} tol {:.3e} [{:?}]",
        flux.verdict, flux.max_across_spread, flux.max_within_spread, flux.tol_branch, t0.elapsed());
    // branch-resolved fits at the min endpoint
    for b in 0..2 {
        let series = flux.branch_series(b);
        println!("branch {b}: {} levels, sample: {:?}", series.len(), &series.iter().take(3).collect::<Vec<_>>());
        match fit_puiseux_series(&series, flux.range, EndpointSide::Min, 4) {
            Ok(fit) => println!(
                "  fit: k0 {} exps {:?} coeffs {:?} holder {:?} res {:.2e}",
                fit.k0, fit.exponents, fit.coefficients.iter().map(|c| (c * 1e4).round() / 1e4).collect::<Vec<_>>(), fit.holder_exponent, fit.residual
            ),
            Err(e) => println!("  fit error: {e}"),
        }
    }
}
