//! Bayesian optimization on the (negated) Branin function, with the trace
//! written as JSON lines and replayed.

use nanocone::optimizer::{optimize, Dimension, Evaluation, OptimizationTrace, OptimizerSettings, ParameterSpace};

fn branin(x: &[f64]) -> f64 {
    let (a, b, c) = (1.0, 5.1 / (4.0 * std::f64::consts::PI.powi(2)), 5.0 / std::f64::consts::PI);
    let (r, s, t) = (6.0, 10.0, 1.0 / (8.0 * std::f64::consts::PI));
    a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = ParameterSpace::new(
        vec![
            Dimension { name: "x1".into(), lo: -5.0, hi: 10.0 },
            Dimension { name: "x2".into(), lo: 0.0, hi: 15.0 },
        ],
        vec![],
    )?;
    let settings = OptimizerSettings { budget: 60, seed: 3, ..Default::default() };
    let path = std::env::temp_dir().join("branin_trace.jsonl");
    let objective = |x: &[f64]| Ok::<_, String>(Evaluation { value: -branin(x), info: serde_json::Value::Null });
    let trace = optimize("neg_branin", &space, objective, &settings, Some(&path), None)?;
    let best = trace.best().expect("at least one evaluation");
    println!("best -branin = {:.5} at ({:.4}, {:.4}); optimum -0.39789", best.value.unwrap(), best.params[0], best.params[1]);
    for (i, v) in trace.incumbent_history().iter().enumerate().step_by(10) {
        println!("  after {:2} evaluations: {:.4}", i + 1, v.unwrap_or(f64::NAN));
    }

    let replay = optimize("neg_branin", &space, objective, &settings, None, Some(OptimizationTrace::read(&path)?))?;
    println!("replayed trace identical: {}", replay.to_jsonl()? == trace.to_jsonl()?);
    Ok(())
}
