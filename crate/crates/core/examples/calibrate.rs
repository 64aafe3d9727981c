//! Tabulates `(kH)^p Ĉ_sol` against the measured defect norm, the data the
//! coarse threshold of the k-robustness run is calibrated on.
//!
//! Usage: `calibrate k p fine coarse per_side extension [...]` with the six
//! numbers repeated for each configuration.

use hybrid_schwarz::coarse::{estimate_csol, EstimateMode};
use hybrid_schwarz::experiment::{Problem, ProblemSpec};
use hybrid_schwarz::precond::PrecondSide;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    println!("k,p,fine,coarse,per_side,extension,k_delta,kH_p_csol,c_sol,defect");
    for c in args.chunks_exact(6) {
        let spec = ProblemSpec::impedance(
            c[0],
            c[1] as usize,
            c[2] as usize,
            c[3] as usize,
            c[4] as usize,
            c[5] as usize,
        );
        let problem = Problem::build(&spec)?;
        let lu = problem.factorize()?;
        let mode = EstimateMode::sampled(200);
        let c_sol = estimate_csol(&problem.fine_problem(&lu), mode)?.value;
        let defect = problem
            .preconditioner(PrecondSide::Left)?
            .norm_defect(&problem.d, mode)?
            .value;
        let scaled = (spec.k * spec.h_coarse()).powi(spec.degree as i32) * c_sol;
        println!(
            "{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.4}",
            spec.k,
            spec.degree,
            spec.fine_cells,
            spec.coarse_cells,
            spec.per_side,
            spec.extension,
            problem.k_delta(),
            scaled,
            c_sol,
            defect
        );
    }
    Ok(())
}
