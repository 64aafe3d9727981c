//! The five pipelines. Each writes its tables into the artifact directory
//! and returns the invariants that failed.

use std::time::Instant;

use hybrid_schwarz::coarse::EstimateMode;
use hybrid_schwarz::experiment::Problem;
use hybrid_schwarz::krylov::{gmres, GmresOptions, SolveReport};
use hybrid_schwarz::linalg::vector;
use hybrid_schwarz::precond::PrecondSide;
use hybrid_schwarz::verify::{
    measure_constants, schatz_experiment, ConstantsReport, Manufactured, MeasureOptions,
};

use crate::config::{Derived, Pipeline, RunConfig};
use crate::output::{sci, Artifacts};

/// Runtime failure, naming the module it came from.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        source: hybrid_schwarz::Error,
    },
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

fn in_module(module: &'static str) -> impl Fn(hybrid_schwarz::Error) -> RunError {
    move |source| RunError::Module { module, source }
}

/// Defect norms below this count as exact in the degenerate configurations.
const EXACT_DEFECT: f64 = 1e-8;

const DISCRETISATION: [&str; 8] = [
    "k",
    "p",
    "dofs",
    "fine_cells",
    "coarse_cells",
    "per_side",
    "extension",
    "k_delta",
];

fn discretisation(p: &Problem) -> Vec<String> {
    let s = &p.spec;
    vec![
        s.k.to_string(),
        s.degree.to_string(),
        p.n_dofs().to_string(),
        s.fine_cells.to_string(),
        s.coarse_cells.to_string(),
        s.per_side.to_string(),
        s.extension.to_string(),
        sci(p.k_delta()),
    ]
}

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    DISCRETISATION.iter().chain(extra).copied().collect()
}

pub struct Runner<'a> {
    pub config: &'a RunConfig,
    pub derived: &'a [Derived],
    pub out: &'a mut Artifacts,
    pub failures: Vec<String>,
}

impl Runner<'_> {
    fn mode(&self) -> EstimateMode {
        EstimateMode::Sampled {
            samples: self.config.solver.samples,
            seed: self.config.run.seed,
        }
    }

    fn measure_options(&self) -> MeasureOptions {
        MeasureOptions {
            mode: self.mode(),
            probes: self.config.solver.probes,
            seed: self.config.run.seed,
        }
    }

    fn build(&mut self, d: &Derived) -> Result<Problem, RunError> {
        let start = Instant::now();
        let p = Problem::build(&d.spec).map_err(in_module("experiment"))?;
        self.out
            .time(format!("k={} build", d.spec.k), start.elapsed());
        Ok(p)
    }

    fn solve(&mut self, p: &Problem) -> Result<SolveReport, RunError> {
        let pre = p
            .preconditioner(self.config.side())
            .map_err(in_module("precond"))?;
        let b = p
            .plane_wave_load(self.config.solver.direction)
            .map_err(in_module("assembly"))?;
        let opts = GmresOptions::new(self.config.side(), self.config.inner())
            .tol(self.config.solver.tol)
            .max_iter(self.config.solver.max_iter);
        let (_, report) = gmres(&p.a, &pre, &b, &vector::zeros(p.n_dofs()), Some(&p.d), opts)
            .map_err(in_module("krylov"))?;
        self.out.time(format!("k={} solve", p.spec.k), report.wall);
        if !report.converged {
            self.failures.push(format!(
                "k={}: GMRES did not reach {:.1e} in {} iterations",
                p.spec.k, self.config.solver.tol, report.iterations
            ));
        }
        Ok(report)
    }

    fn constants(&mut self, p: &Problem) -> Result<ConstantsReport, RunError> {
        let start = Instant::now();
        let report = measure_constants(p, &self.measure_options()).map_err(in_module("verify"))?;
        self.out
            .time(format!("k={} constants", p.spec.k), start.elapsed());
        if !report.passed() {
            self.failures.push(format!(
                "k={}: probe sup {:.3e} or defect {:.3e} exceeds the bound {:.3e}",
                p.spec.k, report.audit_sup, report.defect_left, report.theorem_rhs
            ));
        }
        Ok(report)
    }

    pub fn run(&mut self) -> Result<(), RunError> {
        match self.config.run.pipeline {
            Pipeline::Solve => self.run_solve(),
            Pipeline::Defect => self.run_defect(),
            Pipeline::Constants => self.run_constants(),
            Pipeline::Schatz => self.run_schatz(),
            Pipeline::Sweep => self.run_sweep(),
        }
    }

    fn run_solve(&mut self) -> Result<(), RunError> {
        let mut rows = Vec::new();
        for d in self.derived {
            let p = self.build(d)?;
            let rep = self.solve(&p)?;
            let rel = rep.relative();
            let e0 = rep.euclidean[0];
            let rel_e: Vec<f64> = rep
                .euclidean
                .iter()
                .map(|e| if e0 > 0.0 { e / e0 } else { 0.0 })
                .collect();
            self.out.csv(
                &format!("history_k{}.csv", d.spec.k),
                &["iter", "res_selected", "res_euclidean"],
                rel.iter()
                    .zip(&rel_e)
                    .enumerate()
                    .map(|(i, (r, e))| [i.to_string(), sci(*r), sci(*e)]),
            )?;
            let mut row = discretisation(&p);
            row.extend([
                format!("{:?}", self.config.solver.side).to_lowercase(),
                self.config.inner().name().to_string(),
                rep.iterations.to_string(),
                rep.converged.to_string(),
                sci(*rel.last().unwrap_or(&0.0)),
                sci(*rel_e.last().unwrap_or(&0.0)),
                rep.reorthogonalisations.to_string(),
            ]);
            rows.push(row);
        }
        let head = header(&[
            "side",
            "inner",
            "iterations",
            "converged",
            "final_res_selected",
            "final_res_euclidean",
            "reorthogonalisations",
        ]);
        self.out.csv("solve.csv", &head, rows)?;
        Ok(())
    }

    fn run_defect(&mut self) -> Result<(), RunError> {
        let mut rows = Vec::new();
        for d in self.derived {
            let p = self.build(d)?;
            let start = Instant::now();
            let mut row = discretisation(&p);
            let mut values = Vec::new();
            for side in [PrecondSide::Left, PrecondSide::Right] {
                let pre = p.preconditioner(side).map_err(in_module("precond"))?;
                let v = pre
                    .norm_defect(&p.d, self.mode())
                    .map_err(in_module("precond"))?
                    .value;
                values.push(v);
                row.push(sci(v));
            }
            self.out
                .time(format!("k={} defect", d.spec.k), start.elapsed());
            let degenerate = d.spec.per_side == 1 || d.spec.coarse_cells == d.spec.fine_cells;
            if degenerate && values.iter().any(|v| *v > EXACT_DEFECT) {
                self.failures.push(format!(
                    "k={}: degenerate configuration has defect {values:?} above {EXACT_DEFECT:.0e}",
                    d.spec.k
                ));
            }
            rows.push(row);
        }
        self.out.csv(
            "defect.csv",
            &header(&["defect_left", "defect_right"]),
            rows,
        )?;
        Ok(())
    }

    fn run_constants(&mut self) -> Result<(), RunError> {
        let mut rows = Vec::new();
        for d in self.derived {
            let p = self.build(d)?;
            let report = self.constants(&p)?;
            self.out
                .text(&format!("constants_k{}.txt", d.spec.k), &report.summary())?;
            rows.push(report.csv_row());
        }
        self.out
            .csv("constants.csv", &ConstantsReport::CSV_HEADER, rows)?;
        Ok(())
    }

    fn run_schatz(&mut self) -> Result<(), RunError> {
        for d in self.derived {
            let n = d.spec.fine_cells;
            let levels: Vec<usize> = if self.config.solver.schatz_levels.is_empty() {
                (2..=n).filter(|c| n % c == 0).collect()
            } else {
                self.config.solver.schatz_levels.clone()
            };
            let start = Instant::now();
            let solution = Manufactured::plane_wave(d.spec.k, self.config.solver.direction);
            let rep = schatz_experiment(&d.spec, &levels, &solution, self.mode())
                .map_err(in_module("verify"))?;
            self.out
                .time(format!("k={} schatz", d.spec.k), start.elapsed());
            if !rep.passed() {
                self.failures.push(format!(
                    "k={}: Schatz quasi-optimality check failed",
                    d.spec.k
                ));
            }
            let rows = rep.levels.iter().map(|l| {
                vec![
                    l.coarse_cells.to_string(),
                    sci(l.h_coarse),
                    sci(l.eta),
                    sci(l.l2_error),
                    sci(l.h1_error),
                    sci(l.best_h1_error),
                    sci(l.quasi_optimality),
                    sci(l.exact_l2_error),
                    sci(l.exact_h1_error),
                    l.under_threshold.to_string(),
                    l.qos_holds.to_string(),
                    l.quasi_optimal.to_string(),
                ]
            });
            self.out.csv(
                &format!("schatz_k{}.csv", d.spec.k),
                &[
                    "coarse_cells",
                    "H_coarse",
                    "eta",
                    "l2_error",
                    "h1k_error",
                    "best_h1k_error",
                    "quasi_optimality",
                    "exact_l2_error",
                    "exact_h1k_error",
                    "under_threshold",
                    "qos_holds",
                    "quasi_optimal",
                ],
                rows,
            )?;
        }
        Ok(())
    }

    fn run_sweep(&mut self) -> Result<(), RunError> {
        const COLUMNS: [&str; 16] = [
            "iterations",
            "converged",
            "defect_left",
            "defect_right",
            "theorem_rhs",
            "audit_sup",
            "mu",
            "gamma",
            "c_com",
            "c_pou",
            "c_cont",
            "sigma_l2",
            "sigma_h1",
            "eta",
            "c_sol",
            "error",
        ];
        let mut rows = Vec::new();
        let mut iterations = Vec::new();
        for d in self.derived {
            // a failing wavenumber is recorded in its row and the sweep moves on
            let row = match self.sweep_row(d) {
                Ok((row, its)) => {
                    iterations.push((d.spec.k, its));
                    row
                }
                Err(e) => {
                    self.failures.push(format!("k={}: {e}", d.spec.k));
                    let s = &d.spec;
                    let mut row = vec![
                        s.k.to_string(),
                        s.degree.to_string(),
                        String::new(),
                        s.fine_cells.to_string(),
                        s.coarse_cells.to_string(),
                        s.per_side.to_string(),
                        s.extension.to_string(),
                    ];
                    row.resize(DISCRETISATION.len() + COLUMNS.len() - 1, String::new());
                    row.push(e.to_string());
                    row
                }
            };
            rows.push(row);
        }
        self.out.csv("sweep.csv", &header(&COLUMNS), rows)?;
        let mut summary = String::new();
        for (k, its) in &iterations {
            summary += &format!("k = {k}: {its} iterations\n");
        }
        if let (Some(max), Some(min)) = (
            iterations.iter().map(|(_, i)| *i).max(),
            iterations.iter().map(|(_, i)| *i).min(),
        ) {
            let ratio = max as f64 / min.max(1) as f64;
            summary += &format!("iteration ratio max/min = {ratio:.3} ({max}/{min})\n");
        }
        summary += "context: a published comparison study saw iteration counts go from 41 to 44 when k doubled \
                    with rescaled subdomains; reported for orientation only, not asserted\n";
        self.out.text("sweep_summary.txt", &summary)?;
        print!("{summary}");
        Ok(())
    }

    fn sweep_row(&mut self, d: &Derived) -> Result<(Vec<String>, usize), RunError> {
        let p = self.build(d)?;
        let rep = self.solve(&p)?;
        let c = self.constants(&p)?;
        let mut row = discretisation(&p);
        row.extend([rep.iterations.to_string(), rep.converged.to_string()]);
        row.extend(
            [
                c.defect_left,
                c.defect_right,
                c.theorem_rhs,
                c.audit_sup,
                c.mu,
                c.gamma,
                c.c_com,
                c.c_pou,
                c.c_cont,
                c.sigma_l2,
                c.sigma_h1,
                c.eta,
                c.c_sol,
            ]
            .map(sci),
        );
        row.push(String::new());
        Ok((row, rep.iterations))
    }
}
