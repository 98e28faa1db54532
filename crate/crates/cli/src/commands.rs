use std::path::{Path, PathBuf};

use serde_json::json;

use aflib::envelope::{envelope_recession, quasiconvex_envelope, EnvelopeConfig};
use aflib::experiments::{
    jensen_check, lsc_experiment, relaxation_experiment, ExperimentReport, JensenConfig,
    JensenLocation, LscConfig, OneHomogeneous, RelaxConfig,
};
use aflib::field::PeriodicField;
use aflib::integrand::{IntegrandSpec, RecessionMode};
use aflib::measure::{area_functional, evaluate_functional, singular_polar_check, GridMeasure};
use aflib::operator::{builtin_operator, OperatorSpec};
use aflib::projection::{
    afree_residual, apply_operator, build_projector_table, sobolev_negative_norm,
};
use aflib::sphere::SphereSampling;
use aflib::wave_cone::{
    rank_profile, sample_rows, wavecone_membership, wavecone_span, DEFAULT_RANK_TOL,
};
use aflib::{Error, Result};

use crate::report::Outcome;

/// An operator file, or `name:d[:m]` for the coefficient-free built-ins.
pub fn load_op(arg: &str) -> Result<OperatorSpec> {
    let path = Path::new(arg);
    if path.exists() {
        return OperatorSpec::from_json_str(&std::fs::read_to_string(path)?);
    }
    let parts: Vec<&str> = arg.split(':').collect();
    if parts.len() >= 2 && ["div", "curl", "curlcurl"].contains(&parts[0]) {
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad number '{s}' in operator '{arg}'")))
        };
        let d = num(parts[1])?;
        let m = parts.get(2).map(|s| num(s)).transpose()?.unwrap_or(1);
        return builtin_operator(parts[0], d, m, None);
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("operator file '{arg}' not found"),
    )))
}

/// A built-in name or an inline JSON integrand object.
pub fn load_integrand(arg: &str, n: usize) -> Result<IntegrandSpec> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Error::Parse(e.to_string()))
    } else {
        IntegrandSpec::named(arg, n)
    }
}

pub fn load_field(path: &Path) -> Result<PeriodicField> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        PeriodicField::from_csv(&std::fs::read_to_string(path)?)
    } else {
        PeriodicField::load(path)
    }
}

fn op_summary(op: &OperatorSpec) -> serde_json::Value {
    json!({
        "d": op.dim(),
        "N": op.state_dim(),
        "n": op.eq_dim(),
        "k": op.order(),
        "homogeneous": op.is_homogeneous(),
    })
}

pub fn operator_check(op_arg: &str, tol: Option<f64>) -> Result<Outcome> {
    let op = load_op(op_arg)?;
    let tol = tol.unwrap_or(DEFAULT_RANK_TOL);
    let sampling = SphereSampling::default_for(op.dim());
    let p = rank_profile(&op, &sampling, tol)?;
    Ok(Outcome {
        config: json!({ "op": op.to_json_value(), "tol": tol, "samples": sampling.len() }),
        result: json!({
            "operator": op_summary(&op),
            "constant_rank": p.is_constant,
            "rank": p.min_rank,
            "min_rank": p.min_rank,
            "max_rank": p.max_rank,
            "min_witness": p.min_witness,
            "max_witness": p.max_witness,
        }),
        pass: p.is_constant,
    })
}

pub fn wavecone(
    op_arg: &str,
    p: Option<Vec<f64>>,
    samples: Option<usize>,
    csv: Option<&Path>,
) -> Result<Outcome> {
    let op = load_op(op_arg)?;
    let sampling = match samples {
        Some(n) => SphereSampling::with_count(op.dim(), n),
        None => SphereSampling::default_for(op.dim()),
    };
    let profile = rank_profile(&op, &sampling, DEFAULT_RANK_TOL)?;
    let span = wavecone_span(&op, &sampling);
    let membership = p
        .as_deref()
        .map(|p| wavecone_membership(&op, p, &sampling))
        .transpose()?;
    if let Some(path) = csv {
        let rows = sample_rows(&op, p.as_deref(), &sampling, DEFAULT_RANK_TOL);
        let mut text = String::new();
        let head: Vec<String> = (0..op.dim()).map(|a| format!("xi_{a}")).collect();
        text.push_str(&format!("{},rank,residual\n", head.join(",")));
        for r in rows {
            let xi: Vec<String> = r.xi.iter().map(|v| format!("{v:.17e}")).collect();
            let res = r.residual.map_or(String::new(), |v| format!("{v:.17e}"));
            text.push_str(&format!("{},{},{}\n", xi.join(","), r.rank, res));
        }
        std::fs::write(path, text)?;
    }
    let pass = membership.as_ref().is_none_or(|m| m.member);
    Ok(Outcome {
        config: json!({ "op": op.to_json_value(), "P": p, "samples": sampling.len() }),
        result: json!({
            "operator": op_summary(&op),
            "constant_rank": profile.is_constant,
            "min_rank": profile.min_rank,
            "max_rank": profile.max_rank,
            "span_dim": span.dim(),
            "span_basis": span.basis_vectors(),
            "membership": membership,
        }),
        pass,
    })
}

pub fn project(op_arg: &str, field: &Path, field_out: Option<&Path>) -> Result<Outcome> {
    let op = load_op(op_arg)?;
    let u = load_field(field)?;
    let table = build_projector_table(&op, u.dims())?;
    let (pu, imag) = table.apply_with_residue(&u)?;
    if let Some(path) = field_out {
        pu.save(path)?;
    }
    Ok(Outcome {
        config: json!({ "op": op.to_json_value(), "field": field, "field_out": field_out }),
        result: json!({
            "grid": u.dims(),
            "input_residual": afree_residual(&op, &u)?,
            "output_residual": afree_residual(&op, &pu)?,
            "input_l2": u.l2_norm(),
            "output_l2": pu.l2_norm(),
            "removed_l2": u.sub(&pu).l2_norm(),
            "max_imag": imag,
        }),
        pass: true,
    })
}

pub fn norm(field: &Path, op_arg: Option<&str>, k: Option<u32>, q: f64) -> Result<Outcome> {
    let u = load_field(field)?;
    let (v, k, op_json) = match op_arg {
        Some(a) => {
            let op = load_op(a)?;
            let k = k.unwrap_or(op.order() as u32);
            (apply_operator(&op, &u)?, k, Some(op.to_json_value()))
        }
        None => (u, k.unwrap_or(1), None),
    };
    let value = sobolev_negative_norm(&v, k, q)?;
    Ok(Outcome {
        config: json!({ "field": field, "op": op_json, "k": k, "q": q }),
        result: json!({ "norm": value, "l2": v.l2_norm(), "grid": v.dims() }),
        pass: true,
    })
}

pub struct EnvelopeArgs<'a> {
    pub op: &'a str,
    pub f: &'a str,
    pub a0: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub grid: Option<Vec<usize>>,
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub dir: Option<Vec<f64>>,
    pub recession: bool,
    pub t_grid: Vec<f64>,
    pub field_out: Option<PathBuf>,
    pub seed: u64,
}

pub fn envelope(args: EnvelopeArgs<'_>) -> Result<Outcome> {
    let op = load_op(args.op)?;
    let spec = load_integrand(args.f, op.state_dim())?;
    let f = spec.build()?;
    let mut cfg = EnvelopeConfig {
        seed: args.seed,
        ..EnvelopeConfig::default()
    };
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(r) = args.restarts {
        cfg.restarts = r;
    }
    if let Some(m) = args.max_iters {
        cfg.max_iters = m;
    }
    cfg.grid = cfg.resolved_grid(op.dim());
    let x0 = args.x0.unwrap_or_else(|| vec![0.0; op.dim()]);
    let a0 = args.a0.unwrap_or_else(|| vec![0.0; op.state_dim()]);
    let config = json!({
        "op": op.to_json_value(),
        "integrand": spec,
        "A0": a0,
        "x0": x0,
        "envelope": cfg,
        "dir": args.dir,
        "recession": args.recession,
        "t_grid": args.t_grid,
    });
    if args.recession {
        let dir = args
            .dir
            .ok_or_else(|| Error::InvalidArgument("--recession needs --dir".into()))?;
        let est = envelope_recession(&op, &f, &x0, &dir, &args.t_grid, &cfg)?;
        return Ok(Outcome {
            config,
            result: json!({ "recession": est }),
            pass: true,
        });
    }
    let r = quasiconvex_envelope(&op, &f, &x0, &a0, &cfg)?;
    if let Some(path) = &args.field_out {
        r.argmin_field.save(path)?;
    }
    Ok(Outcome {
        config,
        result: serde_json::to_value(&r)?,
        pass: true,
    })
}

pub fn measure_eval(
    f_arg: &str,
    mu_path: &Path,
    mode: RecessionMode,
    op_arg: Option<&str>,
) -> Result<Outcome> {
    let mu = GridMeasure::load(mu_path)?;
    let spec = load_integrand(f_arg, mu.ncomp())?;
    let f = spec.build()?;
    let value = evaluate_functional(&f, &mu, mode)?;
    let polar = op_arg
        .map(|a| load_op(a).and_then(|op| singular_polar_check(&mu, &op)))
        .transpose()?;
    let pass = polar.as_ref().is_none_or(|p| p.iter().all(|c| c.member));
    Ok(Outcome {
        config: json!({ "integrand": spec, "mu": mu_path, "mode": mode, "op": op_arg }),
        result: json!({
            "value": value,
            "area": area_functional(&mu),
            "total_variation": mu.total_variation(),
            "singular_pieces": mu.singular.len(),
            "polar_check": polar,
        }),
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentKind {
    Lsc,
    Relax,
    Jensen,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))
}

pub fn experiment(
    kind: ExperimentKind,
    config: &Path,
    csv: Option<&Path>,
    location: Option<JensenLocation>,
    seed: Option<u64>,
) -> Result<Outcome> {
    let base = config.parent().filter(|p| !p.as_os_str().is_empty());
    let (resolved, report): (serde_json::Value, ExperimentReport) = match kind {
        ExperimentKind::Lsc => {
            let cfg: LscConfig = read_config(config)?;
            (serde_json::to_value(&cfg)?, lsc_experiment(&cfg, base)?)
        }
        ExperimentKind::Relax => {
            let mut cfg: RelaxConfig = read_config(config)?;
            if let Some(s) = seed {
                cfg.envelope.seed = s;
            }
            (
                serde_json::to_value(&cfg)?,
                relaxation_experiment(&cfg, base)?,
            )
        }
        ExperimentKind::Jensen => {
            let mut cfg: JensenConfig = read_config(config)?;
            if let Some(s) = seed {
                for case in &mut cfg.singular {
                    if let OneHomogeneous::EnvelopeRecession { envelope, .. } = &mut case.g {
                        envelope.seed = s;
                    }
                }
            }
            (
                serde_json::to_value(&cfg)?,
                jensen_check(&cfg, location, base)?,
            )
        }
    };
    if let Some(path) = csv {
        report.write_csv(std::fs::File::create(path)?)?;
    }
    Ok(Outcome {
        config: resolved,
        pass: report.as_expected,
        result: serde_json::to_value(&report)?,
    })
}
