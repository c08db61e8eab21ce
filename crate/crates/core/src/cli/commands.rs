use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, Validated};
use super::{Command, Output, RunError};
use crate::energy::{BodyForce, Field};
use crate::environment::{estimate_moments, EnvironmentSpec, WeightField};
use crate::error::{Error, Result};
use crate::gluing::{glue_cutoff, glue_truncate, GlueParams};
use crate::homogenize::{
    affine, estimate_w0, extract_tensor, gamma_gap_experiment, growth_bounds_check, layered_closed_form, whom_k,
    HomTensor,
};
use crate::inequalities::{iid_mu, mu_moment_estimate, poincare_suite, PoincareParams};
use crate::lattice::Region;

type CmdResult = std::result::Result<(), RunError>;

fn io(e: std::io::Error) -> RunError {
    RunError::Engine(Error::Io(e))
}

fn summary(out: &Output, command: Command, cfg: &ExperimentConfig, body: serde_json::Value) -> CmdResult {
    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'a str,
        config_sha256: &'a str,
        seed: u64,
        samples: usize,
        result: serde_json::Value,
    }
    let s = Summary {
        command: command.name(),
        config_sha256: out.config_hash(),
        seed: cfg.seed,
        samples: cfg.samples,
        result: body,
    };
    out.json("summary.json", &s).map_err(io)
}

fn flat(f: &[f64]) -> String {
    f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Drops the header line of every CSV block after the first.
fn concat_csv(blocks: &[String]) -> String {
    let mut s = String::new();
    for (i, b) in blocks.iter().enumerate() {
        if i == 0 {
            s.push_str(b);
        } else if let Some((_, rest)) = b.split_once('\n') {
            s.push_str(rest);
        }
    }
    s
}

pub fn dispatch(command: Command, cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    match command {
        Command::Cell => cell(cfg, v, out),
        Command::Homogenize => homogenize(cfg, v, out),
        Command::Tensor => tensor(cfg, v, out),
        Command::LayeredVerify => layered_verify(cfg, v, out),
        Command::Dirichlet => dirichlet(cfg, v, out),
        Command::Poincare => poincare(cfg, v, out),
        Command::Mu => mu(cfg, v, out),
        Command::GlueDemo => glue_demo(cfg, v, out),
        Command::Moments => moments(cfg, v, out),
    }
}

fn cell(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let k = cfg.k.unwrap_or(4);
    let ests = cfg
        .f
        .iter()
        .map(|f| estimate_w0(&v.lattice, &cfg.environment, &v.potential, f, &[k], cfg.samples, &cfg.solver))
        .collect::<Result<Vec<_>>>()?;
    out.csv("cell.csv", &concat_csv(&ests.iter().map(|e| e.to_csv()).collect::<Vec<_>>())).map_err(io)?;
    let ok = ests.iter().all(|e| e.sandwich_ok());
    summary(out, Command::Cell, cfg, json!({ "k": k, "sandwich_ok": ok }))?;
    if !ok {
        return Err(RunError::Check("periodic value exceeds the Dirichlet value".into()));
    }
    Ok(())
}

fn homogenize(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let schedule = if cfg.k_schedule.is_empty() { vec![4, 8, 16, 32] } else { cfg.k_schedule.clone() };
    let ests = cfg
        .f
        .iter()
        .map(|f| estimate_w0(&v.lattice, &cfg.environment, &v.potential, f, &schedule, cfg.samples, &cfg.solver))
        .collect::<Result<Vec<_>>>()?;
    out.csv("whom_rows.csv", &concat_csv(&ests.iter().map(|e| e.to_csv()).collect::<Vec<_>>())).map_err(io)?;
    let mut levels = String::from("F_flat,k,mean,se,count\n");
    for e in &ests {
        for l in &e.levels {
            levels.push_str(&format!("{},{},{},{},{}\n", flat(&e.f), l.k, l.mean, l.se, l.count));
        }
    }
    out.csv("whom_levels.csv", &levels).map_err(io)?;

    // growth envelope, when the moments it needs are finite
    let p = v.potential.p();
    let alpha = cfg.exponents.alpha.unwrap_or(1.0);
    let beta = cfg.exponents.beta.unwrap_or(1.0 / (p - 1.0));
    let moments = estimate_moments(&v.lattice, &cfg.environment, alpha, beta, p, cfg.samples.max(1000))?;
    let finite = moments.rows.iter().all(|r| !r.divergent && r.alpha_moment.is_finite());
    let mut results = Vec::new();
    let mut failure = None;
    for e in &ests {
        let cert = if finite && alpha >= 1.0 {
            match growth_bounds_check(e, &moments, &v.potential, v.potential.c1()) {
                Ok(c) => json!(c),
                Err(Error::BoundViolated(msg)) => {
                    failure.get_or_insert(msg.clone());
                    json!({ "violation": msg })
                }
                Err(other) => return Err(other.into()),
            }
        } else {
            serde_json::Value::Null
        };
        results.push(json!({
            "F": e.f,
            "estimate": e.estimate,
            "uncertainty": e.uncertainty,
            "upper_bound_only": e.upper_bound_only,
            "sandwich_ok": e.sandwich_ok(),
            "growth": cert,
        }));
    }
    summary(out, Command::Homogenize, cfg, json!({ "k_schedule": schedule, "estimates": results }))?;
    if let Some(msg) = failure {
        return Err(RunError::Check(msg));
    }
    if !ests.iter().all(|e| e.sandwich_ok()) {
        return Err(RunError::Check("periodic value exceeds the Dirichlet value".into()));
    }
    Ok(())
}

fn build_tensor(cfg: &ExperimentConfig, v: &Validated) -> Result<HomTensor> {
    match &cfg.tensor {
        Some(m) => HomTensor::from_matrix(v.lattice.n() * v.lattice.d(), m),
        None => extract_tensor(&v.lattice, &cfg.environment, &v.potential, cfg.k.unwrap_or(8), cfg.samples, &cfg.solver),
    }
}

fn tensor(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let t = build_tensor(cfg, v)?;
    let mut s = String::from("row,col,value\n");
    for a in 0..t.dim {
        for b in 0..t.dim {
            s.push_str(&format!("{a},{b},{}\n", t.get(a, b)));
        }
    }
    out.csv("tensor.csv", &s).map_err(io)?;
    summary(out, Command::Tensor, cfg, json!(t))?;
    if !(t.min_eigenvalue > 0.0) {
        return Err(RunError::Check(format!("tensor is not positive definite (λ_min = {})", t.min_eigenvalue)));
    }
    Ok(())
}

fn layered_verify(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let d = v.lattice.d();
    let p = v.potential.p();
    let ks = if cfg.k_schedule.is_empty() { vec![cfg.k.unwrap_or(2)] } else { cfg.k_schedule.clone() };
    let tol = cfg.tolerance.unwrap_or(1e-8);
    let fixed = cfg.layers.clone();
    let samples = if fixed.is_some() { 1 } else { cfg.samples };
    let layered = EnvironmentSpec::layered(cfg.environment.dist[0].clone(), cfg.environment.seed);
    let mut s = String::from("F,k,sample,value,oracle,abs_err\n");
    let mut worst: f64 = 0.0;
    for &k in &ks {
        for sample in 0..samples as u64 {
            let env = layered.sample(sample);
            let from_layers = |z: &[i64], _: usize| {
                let l = fixed.as_ref().expect("fixed layers");
                l[z[0].rem_euclid(l.len() as i64) as usize]
            };
            let weights: &dyn WeightField = if fixed.is_some() { &from_layers } else { &env };
            for j in 0..d {
                let mut f = vec![0.0; d];
                f[j] = 1.0;
                let value = whom_k(&v.lattice, weights, &v.potential, &f, k, &cfg.solver, None)?.value;
                let oracle = layered_closed_form(weights, d, k, j, 1.0, p);
                let err = (value - oracle).abs();
                worst = worst.max(err);
                s.push_str(&format!("e{},{k},{sample},{value},{oracle},{err}\n", j + 1));
            }
        }
    }
    out.csv("layered.csv", &s).map_err(io)?;
    summary(out, Command::LayeredVerify, cfg, json!({ "k": ks, "max_abs_err": worst, "tolerance": tol }))?;
    if worst > tol {
        return Err(RunError::Check(format!("layered closed form missed by {worst:e}")));
    }
    Ok(())
}

fn dirichlet(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let (d, n) = (v.lattice.d(), v.lattice.n());
    let t = build_tensor(cfg, v)?;
    let region = cfg.region.clone().unwrap_or_else(|| Region::cube(d, 0.0, 1.0));
    let schedule = if cfg.eps_schedule.is_empty() { vec![8, 16, 32] } else { cfg.eps_schedule.clone() };
    let force = BodyForce::Uniform(cfg.force.clone().unwrap_or_else(|| vec![1.0; n]));
    let f0 = cfg.f.first().cloned().unwrap_or_else(|| vec![0.0; n * d]);
    let g = affine(&f0, n);
    let mut s = String::from("sample,m,eps,min_J_eps,min_J_hom,gap,iterations\n");
    let mut reports = Vec::new();
    for sample in 0..cfg.samples as u64 {
        let env = cfg.environment.sample(sample);
        let r = gamma_gap_experiment(&v.lattice, &env, &v.potential, &t, &g, &force, &region, &schedule, &cfg.solver)?;
        for row in &r.rows {
            s.push_str(&format!(
                "{sample},{},{},{},{},{},{}\n",
                row.m, row.eps, row.min_j_eps, r.min_j_hom, row.gap, row.iterations
            ));
        }
        reports.push(r);
    }
    out.csv("gamma_gap.csv", &s).map_err(io)?;
    let decreasing = reports.iter().filter(|r| r.rows.last().map(|l| l.gap) < r.rows.first().map(|f| f.gap)).count();
    summary(
        out,
        Command::Dirichlet,
        cfg,
        json!({ "eps_schedule": schedule, "tensor": t.matrix, "samples_with_shrinking_gap": decreasing }),
    )
}

fn poincare(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let ex = &cfg.exponents;
    let params = PoincareParams {
        p: v.potential.p(),
        q: ex.q.expect("validated"),
        alpha: ex.alpha.expect("validated"),
        beta: ex.beta.expect("validated"),
        bounds: None,
    };
    let schedule = if cfg.eps_schedule.is_empty() { vec![4, 8, 16, 32] } else { cfg.eps_schedule.clone() };
    let trials = cfg.trials.unwrap_or(100);
    let rep = poincare_suite(&v.lattice, &cfg.environment, &params, &schedule, trials, cfg.seed)?;
    out.csv("poincare.csv", &rep.to_csv()).map_err(io)?;
    let max_c = rep.max_implied_c();
    summary(out, Command::Poincare, cfg, json!({ "trials": trials, "max_implied_C": max_c, "c_bound": cfg.c_bound }))?;
    match cfg.c_bound {
        Some(c) if max_c > c => Err(RunError::Check(format!("implied constant {max_c} exceeds {c}"))),
        _ => Ok(()),
    }
}

fn mu(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let d = v.lattice.d();
    let p = v.potential.p();
    let env = cfg.environment.sample(0);
    let z = vec![0i64; d];
    let families = (0..d).map(|i| iid_mu(&v.lattice, &env, &z, i, p)).collect::<Result<Vec<_>>>()?;
    out.json("paths.json", &families).map_err(io)?;
    let moment = match (cfg.exponents.beta, cfg.exponents.gamma) {
        (Some(beta), Some(gamma)) => {
            let est = mu_moment_estimate(&v.lattice, &cfg.environment, p, beta, gamma, cfg.samples.max(2))?;
            out.csv("mu_moment.csv", &est.to_csv()).map_err(io)?;
            json!(est)
        }
        _ => serde_json::Value::Null,
    };
    let mus: Vec<f64> = families.iter().map(|f| f.mu).collect();
    summary(out, Command::Mu, cfg, json!({ "mu_at_origin": mus, "moment": moment }))
}

fn glue_demo(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let g = cfg.glue.as_ref().expect("validated");
    let (d, n) = (v.lattice.d(), v.lattice.n());
    let region = cfg.region.clone().unwrap_or_else(|| Region::cube(d, 0.0, 0.5));
    let f0 = cfg.f.first().cloned().unwrap_or_else(|| {
        let mut f = vec![0.0; n * d];
        f[0] = 1.0;
        f
    });
    let eps = 1.0 / g.m_eps as f64;
    let bar = affine(&f0, n);
    let amp = g.amplitude;
    let wave = |x: &[f64]| {
        let phase = std::f64::consts::TAU * (x[0] + 2.0 * x.get(1).copied().unwrap_or(0.0)) / (7.0 * eps);
        bar(x).into_iter().map(|b| b + amp * eps * phase.sin()).collect::<Vec<_>>()
    };
    let u = Field::sample(&v.lattice, g.m_eps, &region, Field::halo_for(&v.lattice), wave)?;
    let env = cfg.environment.sample(0);
    let params = GlueParams { delta: g.delta, m: g.layers, s: g.s, big_m: None };
    let (_, rep) = if g.s.is_some() {
        glue_truncate(&v.lattice, &env, &v.potential, &u, &bar, &region, &params)?
    } else {
        glue_cutoff(&v.lattice, &env, &v.potential, &u, &bar, &region, &params)?
    };
    out.csv("glue.csv", &rep.to_csv()).map_err(io)?;
    summary(
        out,
        Command::GlueDemo,
        cfg,
        json!({
            "input_energy": rep.input_energy,
            "output_energy": rep.output_energy(),
            "increment": rep.increment(),
            "chosen": rep.chosen,
        }),
    )
}

fn moments(cfg: &ExperimentConfig, v: &Validated, out: &Output) -> CmdResult {
    let p = v.potential.p();
    let alpha = cfg.exponents.alpha.unwrap_or(1.0);
    let beta = cfg.exponents.beta.unwrap_or(1.0 / (p - 1.0));
    let rep = estimate_moments(&v.lattice, &cfg.environment, alpha, beta, p, cfg.samples)?;
    out.csv("moments.csv", &rep.to_csv()).map_err(io)?;
    summary(
        out,
        Command::Moments,
        cfg,
        json!({
            "alpha": alpha,
            "beta": beta,
            "moment_condition": rep.moment_condition,
            "vectorial_condition": rep.vectorial_condition,
        }),
    )
}
