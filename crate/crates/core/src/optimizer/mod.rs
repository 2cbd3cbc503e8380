//! Bayesian optimization: Latin hypercube start, GP surrogate, expected
//! improvement, with a JSON-lines trace written after every evaluation.

mod gp;
mod simplex;
mod space;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gp::{expected_improvement, matern52, Hyperparameters, Surrogate, DEFAULT_JITTER};
pub use simplex::nelder_mead;
pub use space::{latin_hypercube, BoundsSpec, Dimension, IncSpace, LinearConstraint, ParameterSpace};

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("invalid parameter space: {0}")]
    Space(String),
    #[error("invalid optimizer settings: {0}")]
    Settings(String),
    #[error("covariance matrix stays singular after jitter escalation")]
    Degenerate,
    #[error("{failed} of {total} evaluations failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("trace does not match this run: {0}")]
    ResumeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub budget: usize,
    /// Initial design size; `3 × dimension` when unset.
    pub initial_points: Option<usize>,
    pub seed: u64,
    /// Proposals evaluated concurrently per round (constant liar).
    pub batch: usize,
    pub jitter: f64,
    pub hyper_restarts: usize,
    pub acquisition_candidates: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            budget: 40,
            initial_points: None,
            seed: 0,
            batch: 1,
            jitter: DEFAULT_JITTER,
            hyper_restarts: 4,
            acquisition_candidates: 512,
        }
    }
}

impl OptimizerSettings {
    pub fn initial_size(&self, dim: usize) -> usize {
        self.initial_points.unwrap_or(3 * dim)
    }

    pub fn validate(&self, dim: usize) -> Result<(), OptimizerError> {
        let n0 = self.initial_size(dim);
        if n0 == 0 {
            return Err(OptimizerError::Settings("initial design must contain at least one point".into()));
        }
        if self.budget < n0 {
            return Err(OptimizerError::Settings(format!("budget {} is smaller than the initial design ({n0})", self.budget)));
        }
        if self.batch == 0 {
            return Err(OptimizerError::Settings("batch size must be at least 1".into()));
        }
        if !(self.jitter >= 0.0) {
            return Err(OptimizerError::Settings(format!("jitter {} must be non-negative", self.jitter)));
        }
        Ok(())
    }
}

/// Objective value plus free-form metadata stored in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    #[serde(default)]
    pub info: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Initial,
    Acquisition,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub index: usize,
    pub params: Vec<f64>,
    pub value: Option<f64>,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub info: serde_json::Value,
    pub kind: ProposalKind,
    /// Surrogate hyperparameters behind this proposal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<Hyperparameters>,
    /// Best value observed up to and including this one.
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub code_version: String,
    pub objective: String,
    pub space: ParameterSpace,
    pub settings: OptimizerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub header: TraceHeader,
    pub observations: Vec<Observation>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Observation(Observation),
}

impl OptimizationTrace {
    pub fn best(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .filter(|o| o.value.is_some())
            .fold(None, |b: Option<&Observation>, o| if b.is_none_or(|b| o.value > b.value) { Some(o) } else { b })
    }

    pub fn incumbent_history(&self) -> Vec<Option<f64>> {
        self.observations.iter().map(|o| o.incumbent).collect()
    }

    pub fn failures(&self) -> usize {
        self.observations.iter().filter(|o| o.failed).count()
    }

    pub fn to_jsonl(&self) -> Result<String, OptimizerError> {
        let mut s = serde_json::to_string(&Line::Header(self.header.clone()))?;
        s.push('\n');
        for o in &self.observations {
            s.push_str(&serde_json::to_string(&Line::Observation(o.clone()))?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, OptimizerError> {
        let mut header = None;
        let mut observations = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line) {
                Ok(Line::Header(h)) if i == 0 => header = Some(h),
                Ok(Line::Observation(o)) if header.is_some() => observations.push(o),
                Ok(_) => return Err(OptimizerError::ResumeMismatch(format!("unexpected record on line {}", i + 1))),
                // A torn final line from an interrupted write is dropped.
                Err(e) if e.is_eof() => break,
                Err(e) => return Err(e.into()),
            }
        }
        let header = header.ok_or_else(|| OptimizerError::ResumeMismatch("missing header".into()))?;
        Ok(Self { header, observations })
    }
}

struct Sink(Option<BufWriter<File>>);

impl Sink {
    fn open(path: Option<&Path>, trace: &OptimizationTrace) -> Result<Self, OptimizerError> {
        let Some(path) = path else { return Ok(Sink(None)) };
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(trace.to_jsonl()?.as_bytes())?;
        w.flush()?;
        Ok(Sink(Some(w)))
    }

    fn push(&mut self, o: &Observation) -> Result<(), OptimizerError> {
        if let Some(w) = &mut self.0 {
            serde_json::to_writer(&mut *w, &Line::Observation(o.clone()))?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Maximizes EI over the feasible region from random and incumbent-local
/// starts. Falls back to a random feasible point when EI is flat.
pub fn propose_next(
    surrogate: &Surrogate,
    space: &ParameterSpace,
    incumbent: (&[f64], f64),
    candidates: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, ProposalKind), OptimizerError> {
    let d = space.dim();
    let ei_unit = |u: &[f64]| -> f64 {
        if u.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return 0.0;
        }
        let x = space.from_unit(u);
        if !space.is_feasible(&x) {
            return 0.0;
        }
        expected_improvement(surrogate, u, incumbent.1)
    };
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(candidates + 8);
    for _ in 0..candidates {
        let u = space.to_unit(&space.random_feasible(rng)?);
        let v = ei_unit(&u);
        starts.push((u, v));
    }
    let inc_u = space.to_unit(incumbent.0);
    for _ in 0..4 {
        let u: Vec<f64> = inc_u.iter().map(|&t| (t + 0.05 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)).collect();
        let v = ei_unit(&u);
        starts.push((u, v));
    }
    starts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = starts[0].clone();
    for (u0, _) in starts.iter().take(6) {
        let (u, v) = nelder_mead(|u| -ei_unit(u), u0, 0.05, 80 * (d + 1), 1e-12);
        if -v > best.1 {
            best = (u, -v);
        }
    }
    if best.1 <= 1e-12 * surrogate.scale() {
        return Ok((space.random_feasible(rng)?, ProposalKind::Random));
    }
    Ok((space.from_unit(&best.0), ProposalKind::Acquisition))
}

/// Runs the optimization loop, maximizing `objective`. With `resume`, the
/// observations of an earlier trace with identical header are replayed
/// first. The trace is written to `trace_path` after every evaluation.
pub fn optimize<F>(
    objective_label: &str,
    space: &ParameterSpace,
    objective: F,
    settings: &OptimizerSettings,
    trace_path: Option<&Path>,
    resume: Option<OptimizationTrace>,
) -> Result<OptimizationTrace, OptimizerError>
where
    F: Fn(&[f64]) -> Result<Evaluation, String> + Sync,
{
    space.validate()?;
    settings.validate(space.dim())?;
    let header = TraceHeader {
        schema_version: crate::SCHEMA_VERSION,
        code_version: crate::CODE_VERSION.to_string(),
        objective: objective_label.to_string(),
        space: space.clone(),
        settings: settings.clone(),
    };
    let mut trace = OptimizationTrace { header: header.clone(), observations: vec![] };
    if let Some(prev) = resume {
        let mut a = serde_json::to_value(&prev.header)?;
        let mut b = serde_json::to_value(&header)?;
        a["settings"]["budget"] = serde_json::Value::Null;
        b["settings"]["budget"] = serde_json::Value::Null;
        if a != b {
            return Err(OptimizerError::ResumeMismatch("header differs from the current run".into()));
        }
        trace.observations = prev.observations;
        trace.observations.truncate(settings.budget);
    }
    let mut sink = Sink::open(trace_path, &trace)?;

    let n0 = settings.initial_size(space.dim());
    let initial = latin_hypercube(space, n0, &mut rng_for(settings.seed, 0))?;

    while trace.observations.len() < settings.budget {
        let start = trace.observations.len();
        let mut round: Vec<(Vec<f64>, ProposalKind, Option<Hyperparameters>)> = Vec::new();
        if start < n0 {
            let end = (start + settings.batch).min(n0);
            round.extend(initial[start..end].iter().map(|x| (x.clone(), ProposalKind::Initial, None)));
        } else {
            let q = settings.batch.min(settings.budget - start);
            round = propose_batch(&trace, space, settings, start, q)?;
        }
        let results: Vec<Result<Evaluation, String>> = round.par_iter().map(|(x, _, _)| objective(x)).collect();
        for ((x, kind, hyper), res) in round.into_iter().zip(results) {
            let prev = trace.observations.last().and_then(|o| o.incumbent);
            let (value, error, info) = match res {
                Ok(e) if e.value.is_finite() => (Some(e.value), None, e.info),
                Ok(e) => (None, Some(format!("non-finite objective {}", e.value)), e.info),
                Err(msg) => (None, Some(msg), serde_json::Value::Null),
            };
            let incumbent = match (prev, value) {
                (Some(p), Some(v)) => Some(p.max(v)),
                (p, v) => p.or(v),
            };
            let o = Observation {
                index: trace.observations.len(),
                params: x,
                value,
                failed: value.is_none(),
                error,
                info,
                kind,
                hyperparameters: hyper,
                incumbent,
            };
            if o.failed {
                log::warn!("evaluation {} failed: {}", o.index, o.error.as_deref().unwrap_or(""));
            }
            sink.push(&o)?;
            trace.observations.push(o);
        }
        let total = trace.observations.len();
        let failed = trace.failures();
        if total >= n0.min(settings.budget) && 2 * failed > total {
            return Err(OptimizerError::TooManyFailures { failed, total });
        }
    }
    Ok(trace)
}

fn propose_batch(
    trace: &OptimizationTrace,
    space: &ParameterSpace,
    settings: &OptimizerSettings,
    index: usize,
    q: usize,
) -> Result<Vec<(Vec<f64>, ProposalKind, Option<Hyperparameters>)>, OptimizerError> {
    let mut rng = rng_for(settings.seed, index as u64 + 1);
    let ok: Vec<&Observation> = trace.observations.iter().filter(|o| o.value.is_some()).collect();
    if ok.len() < 2 {
        return (0..q).map(|_| Ok((space.random_feasible(&mut rng)?, ProposalKind::Random, None))).collect();
    }
    let mut xs: Vec<Vec<f64>> = ok.iter().map(|o| space.to_unit(&o.params)).collect();
    let mut ys: Vec<f64> = ok.iter().map(|o| o.value.expect("filtered")).collect();
    let fitted = Surrogate::fit(&xs, &ys, settings.jitter, settings.hyper_restarts, &mut rng)?;
    let hyper = fitted.hyper.clone();
    let best = ok.iter().fold(ok[0], |b, o| if o.value > b.value { o } else { b });
    let (best_x, best_y) = (best.params.clone(), best.value.expect("filtered"));
    let mut out = Vec::with_capacity(q);
    let mut s = fitted;
    for k in 0..q {
        let (x, kind) = propose_next(&s, space, (&best_x, best_y), settings.acquisition_candidates, &mut rng)?;
        out.push((x.clone(), kind, Some(hyper.clone())));
        if k + 1 < q {
            // Pretend the pending point returned the incumbent value.
            xs.push(space.to_unit(&x));
            ys.push(best_y);
            s = Surrogate::with_hyperparameters(&xs, &ys, &hyper.length_scales, hyper.signal_variance, settings.jitter)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ParameterSpace {
        ParameterSpace::new(
            vec![Dimension { name: "x".into(), lo: -2.0, hi: 2.0 }, Dimension { name: "y".into(), lo: -2.0, hi: 2.0 }],
            vec![],
        )
        .unwrap()
    }

    fn sphere(x: &[f64]) -> Result<Evaluation, String> {
        Ok(Evaluation { value: -x.iter().map(|v| v * v).sum::<f64>(), info: serde_json::Value::Null })
    }

    #[test]
    fn sphere_reaches_the_centre() {
        let s = OptimizerSettings { budget: 30, seed: 4, ..Default::default() };
        let t = optimize("sphere", &square(), sphere, &s, None, None).unwrap();
        let best = t.best().unwrap().value.unwrap();
        assert!(best > -1e-2, "{best}");
    }

    #[test]
    fn incumbent_never_decreases() {
        let s = OptimizerSettings { budget: 20, seed: 9, ..Default::default() };
        let t = optimize("sphere", &square(), sphere, &s, None, None).unwrap();
        let h: Vec<f64> = t.incumbent_history().into_iter().map(|v| v.unwrap()).collect();
        assert!(h.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.observations.iter().all(|o| square().is_feasible(&o.params)));
    }

    #[test]
    fn budget_below_initial_design_is_rejected() {
        let s = OptimizerSettings { budget: 0, ..Default::default() };
        assert!(matches!(optimize("sphere", &square(), sphere, &s, None, None), Err(OptimizerError::Settings(_))));
    }

    #[test]
    fn failing_objective_aborts() {
        let s = OptimizerSettings { budget: 20, ..Default::default() };
        let f = |x: &[f64]| if x[0] > -1.5 { Err("solver blew up".to_string()) } else { sphere(x) };
        assert!(matches!(optimize("f", &square(), f, &s, None, None), Err(OptimizerError::TooManyFailures { .. })));
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let s = OptimizerSettings { budget: 14, seed: 2, ..Default::default() };
        let f = |x: &[f64]| if x[0] > 1.5 { Err("diverged".to_string()) } else { sphere(x) };
        let t = optimize("f", &square(), f, &s, None, None).unwrap();
        for o in &t.observations {
            assert_eq!(o.failed, o.value.is_none());
            assert_eq!(o.failed, o.error.is_some());
        }
    }

    #[test]
    fn proposals_respect_linear_constraints() {
        let space = ParameterSpace::new(
            vec![Dimension { name: "h".into(), lo: 200.0, hi: 2000.0 }, Dimension { name: "dz".into(), lo: 20.0, hi: 1980.0 }],
            vec![LinearConstraint { coeffs: vec![-1.0, 1.0], bound: -20.0 }],
        )
        .unwrap();
        // Optimum pushes d_z against the constraint.
        let f = |x: &[f64]| Ok(Evaluation { value: x[1] / 1000.0 - ((x[0] - 900.0) / 500.0).powi(2), info: Default::default() });
        let s = OptimizerSettings { budget: 20, seed: 1, batch: 3, ..Default::default() };
        let t = optimize("c", &space, f, &s, None, None).unwrap();
        for o in &t.observations {
            assert!(o.params[1] <= o.params[0] - 20.0 + 1e-9, "{:?}", o.params);
        }
    }

    #[test]
    fn quadratic_proposal_lands_in_bracket() {
        let space = ParameterSpace::new(vec![Dimension { name: "x".into(), lo: 0.0, hi: 1.0 }], vec![]).unwrap();
        let xs = [0.2, 0.5, 0.8];
        let f = |x: f64| -(x - 0.55).powi(2);
        let unit: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = Surrogate::fit(&unit, &ys, DEFAULT_JITTER, 3, &mut rng_for(0, 1)).unwrap();
        let (p, kind) = propose_next(&s, &space, (&[0.5], f(0.5)), 256, &mut rng_for(0, 2)).unwrap();
        assert_eq!(kind, ProposalKind::Acquisition);
        // Dense-grid maximizer of the same acquisition.
        let grid_best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .max_by(|a, b| expected_improvement(&s, &[*a], f(0.5)).total_cmp(&expected_improvement(&s, &[*b], f(0.5))))
            .unwrap();
        assert!(p[0] > 0.2 && p[0] < 0.8, "{p:?}");
        assert!(expected_improvement(&s, &p, f(0.5)) >= 0.99 * expected_improvement(&s, &[grid_best], f(0.5)));
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.jsonl");
        let part = dir.path().join("part.jsonl");
        let s = OptimizerSettings { budget: 16, seed: 21, ..Default::default() };
        optimize("sphere", &square(), sphere, &s, Some(&full), None).unwrap();
        let text = std::fs::read_to_string(&full).unwrap();
        // Keep the header and 10 observations, plus a torn line.
        let mut cut: String = text.lines().take(11).map(|l| format!("{l}\n")).collect();
        cut.push_str(&text.lines().nth(11).unwrap()[..20]);
        std::fs::write(&part, cut).unwrap();
        let prev = OptimizationTrace::read(&part).unwrap();
        assert_eq!(prev.observations.len(), 10);
        optimize("sphere", &square(), sphere, &s, Some(&part), Some(prev)).unwrap();
        assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
    }

    #[test]
    fn resume_rejects_other_seed() {
        let s = OptimizerSettings { budget: 8, seed: 1, ..Default::default() };
        let t = optimize("sphere", &square(), sphere, &s, None, None).unwrap();
        let other = OptimizerSettings { seed: 2, ..s };
        assert!(matches!(optimize("sphere", &square(), sphere, &other, None, Some(t)), Err(OptimizerError::ResumeMismatch(_))));
    }
}
