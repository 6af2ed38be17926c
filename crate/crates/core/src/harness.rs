//! Solver runs, plain-vs-line-search comparison, and trace verification as
//! used by the `iht-ls` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{verify, VerificationReport, VerifyContext};
use crate::error::{invalid, Error, Result};
use crate::instance::{generate_instance, InstanceSpec};
use crate::line_search::{run, run_plain, IterationRecord, LineSearchParams, RunTrace, StopCriteria};
use crate::linalg::{write_matrix_csv, write_vector_csv, DenseMatrix, Vector};
use crate::objective::{L0LeastSquares, SmoothQuadratic};
use crate::step::{BaseStep, IhtStep, DEFAULT_H_FACTOR};
use crate::trace_io::{format_real, write_trace};

/// Rows that `cmd_verify` recomputes and compares.

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub lambda: f64,
    pub h_factor: f64,
    /// Absolute `h`; overrides `h_factor` when set.
    pub h: Option<f64>,
    pub zero_tol: f64,
    pub params: LineSearchParams,
    pub stop: StopCriteria,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            h_factor: DEFAULT_H_FACTOR,
            h: None,
            zero_tol: 0.0,
            params: LineSearchParams::default(),
            stop: StopCriteria::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be positive"));
        }
        if self.h.is_none() && !(self.h_factor > 1.0) {
            return Err(invalid("h_factor", "must be greater than 1"));
        }
        Ok(())
    }

    /// Builds the IHT step for `(A, b)`.
    pub fn build_step(&self, a: DenseMatrix, b: Vector) -> Result<IhtStep> {
        self.validate()?;
        let prob = L0LeastSquares::new(SmoothQuadratic::new(a, b)?, self.lambda)?
            .with_zero_tol(self.zero_tol)?;
        match self.h {
            Some(h) => IhtStep::new(prob, h),
            None => IhtStep::with_h_factor(prob, self.h_factor),
        }
    }

    pub fn verify_context(&self, step: &IhtStep, line_search: bool) -> VerifyContext {
        VerifyContext {
            cert: step.certificate(),
            lipschitz: step.objective().lipschitz(),
            smooth: false,
            params: line_search.then_some(self.params),
            stop: self.stop,
            leave_threshold: Some(step.threshold()),
        }
    }
}

/// Seeded instance, or `(A, b)` loaded from CSV.
#[derive(Clone, Debug)]
pub enum InstanceSource {
    Generated(InstanceSpec),
    Files { a: DenseMatrix, b: Vector },
}

impl InstanceSource {
    pub fn materialize(&self) -> Result<(DenseMatrix, Vector)> {
        match self {
            Self::Generated(spec) => {
                let inst = generate_instance(spec)?;
                Ok((inst.a, inst.b))
            }
            Self::Files { a, b } => Ok((a.clone(), b.clone())),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Generated(spec) => Some(spec.seed),
            Self::Files { .. } => None,
        }
    }
}

pub struct RunOutcome {
    pub step: IhtStep,
    pub trace: RunTrace,
    pub report: VerificationReport,
}

/// Runs IHT from `x⁰ = 0`, with the line search unless `plain`, and verifies
/// the result.
pub fn cmd_run(source: &InstanceSource, cfg: &RunConfig, plain: bool) -> Result<RunOutcome> {
    let (a, b) = source.materialize()?;
    let step = cfg.build_step(a, b)?;
    let x0 = Vector::zeros(step.objective().dim());
    let trace = if plain {
        run_plain(&x0, &step, &cfg.stop)?
    } else {
        run(&x0, &step, &cfg.params, &cfg.stop)?
    };
    let report = verify(&trace, &cfg.verify_context(&step, !plain))?;
    Ok(RunOutcome {
        step,
        trace,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareSummary {
    /// First iteration with `‖d^k‖ ≤ d_tol`.
    pub plain_iters: Option<usize>,
    pub ls_iters: Option<usize>,
    pub plain_final_phi: f64,
    pub ls_final_phi: f64,
    pub seed: Option<u64>,
    /// First iteration within `phi_tol` of the run's own final value.
    pub plain_iters_to_phi: usize,
    pub ls_iters_to_phi: usize,
    pub phi_tol: f64,
    pub d_tol: f64,
}

pub struct CompareOutcome {
    pub plain: RunOutcome,
    pub line_search: RunOutcome,
    pub summary: CompareSummary,
}

/// Tolerance for "reached the final objective value".
pub const PHI_TOL: f64 = 1e-8;

pub fn cmd_compare(source: &InstanceSource, cfg: &RunConfig) -> Result<CompareOutcome> {
    let plain = cmd_run(source, cfg, true)?;
    let line_search = cmd_run(source, cfg, false)?;
    let d_tol = cfg.stop.d_tol();
    let summary = CompareSummary {
        plain_iters: plain.trace.iterations_to_d_tol(d_tol),
        ls_iters: line_search.trace.iterations_to_d_tol(d_tol),
        plain_final_phi: plain.trace.final_phi,
        ls_final_phi: line_search.trace.final_phi,
        seed: source.seed(),
        plain_iters_to_phi: plain.trace.iterations_to_final_phi(PHI_TOL),
        ls_iters_to_phi: line_search.trace.iterations_to_final_phi(PHI_TOL),
        phi_tol: PHI_TOL,
        d_tol,
    };
    Ok(CompareOutcome {
        plain,
        line_search,
        summary,
    })
}

/// `k,phi_plain,phi_ls` with `Φ(x^k)` for both runs; the shorter run's column
/// is left empty once it has ended.
pub fn write_dual_trace(plain: &RunTrace, ls: &RunTrace, w: impl Write) -> Result<()> {
    let p = plain.phi_path();
    let l = ls.phi_path();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "phi_plain", "phi_ls"])?;
    for k in 0..p.len().max(l.len()) {
        let cell = |v: Option<&f64>| v.map(|&x| format_real(x)).unwrap_or_default();
        wtr.write_record([k.to_string(), cell(p.get(k)), cell(l.get(k))])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Replays the run described by `cfg` on `source`, checks that every
/// recorded row agrees with the replay, then runs all diagnostics on the
/// recorded values.
///
/// Whether the trace came from a line-search run is read off the `m_k`
/// column.
pub fn cmd_verify(
    records: Vec<IterationRecord>,
    source: &InstanceSource,
    cfg: &RunConfig,
) -> Result<VerificationReport> {
    let Some(first) = records.first() else {
        return Err(Error::Integrity {
            row: 0,
            message: "trace is empty".into(),
        });
    };
    let line_search = first.m_k.is_some();
    let (a, b) = source.materialize()?;
    let step = cfg.build_step(a, b)?;
    let x0 = Vector::zeros(step.objective().dim());
    let replay = if line_search {
        run(&x0, &step, &cfg.params, &cfg.stop)?
    } else {
        run_plain(&x0, &step, &cfg.stop)?
    };

    for (row, r) in records.iter().enumerate() {
        if r.k != row {
            return Err(Error::Integrity {
                row,
                message: format!("iteration index {} out of sequence", r.k),
            });
        }
        if r.m_k.is_some() != line_search {
            return Err(Error::Integrity {
                row,
                message: "mixed plain and line-search rows".into(),
            });
        }
    }
    if records.len() != replay.records.len() {
        return Err(Error::Integrity {
            row: records.len().min(replay.records.len()),
            message: format!(
                "trace has {} rows, replay produced {}",
                records.len(),
                replay.records.len()
            ),
        });
    }
    for (row, (got, want)) in records.iter().zip(&replay.records).enumerate() {
        if got != want {
            return Err(Error::Integrity {
                row,
                message: format!(
                    "recorded {got:?} but recomputed {want:?}"
                ),
            });
        }
    }

    let claimed = RunTrace { records, ..replay };
    verify(&claimed, &cfg.verify_context(&step, line_search))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_instance(dir: &Path, a: &DenseMatrix, b: &Vector, x_star: Option<&Vector>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix_csv(a, create(&dir.join("A.csv"))?)?;
    write_vector_csv(b, create(&dir.join("b.csv"))?)?;
    if let Some(x) = x_star {
        write_vector_csv(x, create(&dir.join("x_star.csv"))?)?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Writes `<prefix>trace.csv`, `<prefix>verify.json` and `<prefix>x.csv`.
pub fn write_run(dir: &Path, prefix: &str, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_trace(
        &outcome.trace.records,
        create(&dir.join(format!("{prefix}trace.csv")))?,
    )?;
    write_json(
        &dir.join(format!("{prefix}verify.json")),
        &outcome.report.to_json(),
    )?;
    write_vector_csv(
        &outcome.trace.final_x,
        create(&dir.join(format!("{prefix}x.csv")))?,
    )?;
    Ok(())
}

pub fn write_compare(dir: &Path, outcome: &CompareOutcome) -> Result<()> {
    write_run(dir, "plain_", &outcome.plain)?;
    write_run(dir, "ls_", &outcome.line_search)?;
    write_dual_trace(
        &outcome.plain.trace,
        &outcome.line_search.trace,
        create(&dir.join("compare.csv"))?,
    )?;
    write_json(
        &dir.join("summary.json"),
        &serde_json::to_value(&outcome.summary)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_search::SearchStep;

    fn worked_source() -> InstanceSource {
        InstanceSource::Files {
            a: DenseMatrix::identity(2),
            b: Vector::new(vec![3.0, 0.5]).unwrap(),
        }
    }

    fn worked_cfg(d_tol: f64) -> RunConfig {
        RunConfig {
            lambda: 1.0,
            h: Some(2.0),
            stop: StopCriteria::new(10_000, d_tol).unwrap(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn run_on_worked_instance() {
        let out = cmd_run(&worked_source(), &worked_cfg(1e-10), false).unwrap();
        assert_eq!(out.trace.final_x.as_slice(), &[3.0, 0.0]);
        assert_eq!(out.trace.records[0].m_k, Some(SearchStep::Accepted(0)));
        assert_eq!(out.trace.iterations_to_d_tol(1e-10), Some(1));
        assert!(out.report.all_passed(), "{}", out.report.human());
    }

    #[test]
    fn compare_on_worked_instance() {
        let out = cmd_compare(&worked_source(), &worked_cfg(1e-6)).unwrap();
        assert_eq!(out.summary.ls_iters, Some(1));
        assert_eq!(out.summary.plain_iters, Some(21));
        assert_eq!(out.summary.ls_final_phi, 1.125);
        assert!(out.summary.plain_iters_to_phi >= out.summary.ls_iters_to_phi);
    }

    #[test]
    fn compare_from_fixed_point_ties() {
        // Every gradient-step entry falls below the threshold, so x⁰ = 0 is fixed.
        let fixed = InstanceSource::Files {
            a: DenseMatrix::identity(2),
            b: Vector::new(vec![0.5, 0.25]).unwrap(),
        };
        let out = cmd_compare(&fixed, &worked_cfg(1e-6)).unwrap();
        assert_eq!(out.summary.ls_iters, out.summary.plain_iters);
        assert_eq!(out.summary.ls_iters, Some(0));
    }

    #[test]
    fn rejects_bad_lambda() {
        let cfg = RunConfig {
            lambda: 0.0,
            ..RunConfig::default()
        };
        assert!(matches!(
            cmd_run(&worked_source(), &cfg, false),
            Err(Error::InvalidParameter { name: "lambda", .. })
        ));
    }

    #[test]
    fn verify_accepts_fresh_and_rejects_edited_traces() {
        let cfg = worked_cfg(1e-6);
        let out = cmd_run(&worked_source(), &cfg, true).unwrap();
        let rep = cmd_verify(out.trace.records.clone(), &worked_source(), &cfg).unwrap();
        assert!(rep.all_passed());
        assert_eq!(rep.constants.a, rep.constants.nu);

        for row in [7, 10] {
            let mut edited = out.trace.records.clone();
            edited[row].phi_x += 1.0;
            let err = cmd_verify(edited, &worked_source(), &cfg).unwrap_err();
            assert!(matches!(err, Error::Integrity { row: r, .. } if r == row));
        }

        let mut edited = out.trace.records;
        edited.pop();
        assert!(cmd_verify(edited, &worked_source(), &cfg).is_err());
    }

    #[test]
    fn dual_trace_is_rectangular() {
        let out = cmd_compare(&worked_source(), &worked_cfg(1e-6)).unwrap();
        let mut buf = Vec::new();
        write_dual_trace(&out.plain.trace, &out.line_search.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,phi_plain,phi_ls");
        assert_eq!(lines.len(), 1 + 23);
        assert!(lines.iter().all(|l| l.split(',').count() == 3));
        assert!(lines[5].ends_with(','));
    }
}
