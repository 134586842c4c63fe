use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use catlab::arithmetic::{lyapunov, period, period_sweep};
use catlab::bsapprox::{certify, default_grid, sandwich_pair};
use catlab::propagator::{
    eigendecompose, hecke_basis, hecke_generators, quantize_commutant, verify_egorov, DEFAULT_CLUSTER_TOL,
};
use catlab::stats::experiment::{self, basis_for, qe_experiment, Theorem};
use catlab::stats::scan::MassProfile;
use catlab::stats::{matrix_elements, moment};
use serde_json::{json, Value};

use crate::cache::{Cache, CODE_VERSION};
use crate::config::{self, parse_basis, parse_kappa, parse_list, parse_map, parse_range, read_toml, space};
use crate::output::{real, to_json, Outputs, Table};
use crate::{Cli, Command};

fn emit(t: &Table) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(&t.to_csv()?)?;
    out.flush()?;
    Ok(())
}

fn meta(command: &str, started: Instant) -> Value {
    json!({ "command": command, "version": CODE_VERSION, "wall_clock_seconds": started.elapsed().as_secs_f64() })
}

pub fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let Cli { cache_dir, no_cache, out, command } = cli;
    match command {
        Command::Period { map, range, threshold } => {
            let m = parse_map(&map)?;
            let (lo, hi) = parse_range(&range)?;
            if let Some(t) = threshold {
                if !(t > 0.0) {
                    bail!("threshold: must be positive, got {t}");
                }
            }
            let rows = period_sweep(&m, lo, hi, threshold)?;
            let mut t = Table::new(&["n", "period", "ratio", "short"]);
            for r in &rows {
                t.push(vec![r.modulus.to_string(), r.period.to_string(), real(r.ratio), r.short.to_string()]);
            }
            let mut o = Outputs::new(out);
            o.csv("period", &t)?;
            o.json(
                "period",
                &json!({
                    "meta": meta("period", started),
                    "map": [m.a, m.b, m.c, m.d],
                    "range": [lo, hi],
                    "threshold": threshold.map(Ok).unwrap_or_else(|| catlab::arithmetic::default_short_threshold(&m))?,
                    "lyapunov": lyapunov(&m)?,
                    "short": rows.iter().filter(|r| r.short).map(|r| r.modulus).collect::<Vec<_>>(),
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
        Command::Build { space: s, n, check_degree, matrix } => {
            let m = parse_map(&s.map)?;
            let params = space(&m, n, parse_kappa(&s.kappa)?)?;
            let cache = Cache::resolve(cache_dir, no_cache);
            let (p, origin) = cache.propagator(&params, &m, s.seed)?;
            let eg = verify_egorov(&p, check_degree);
            eprintln!("propagator {}", origin.as_str());
            let [k1, k2] = params.kappa();
            let mut t = Table::new(&["n", "kappa1", "kappa2", "seed", "unitarity_residual", "egorov_residual", "egorov_check"]);
            t.push(vec![n.to_string(), real(k1), real(k2), s.seed.to_string(), real(p.unitarity_residual), real(p.egorov_residual), real(eg)]);
            let mut o = Outputs::new(out);
            o.csv("build", &t)?;
            if matrix {
                let mut mt = Table::new(&["i", "j", "re", "im"]);
                for j in 0..n {
                    for i in 0..n {
                        let z = p.u[(i, j)];
                        mt.push(vec![i.to_string(), j.to_string(), real(z.re), real(z.im)]);
                    }
                }
                o.csv("propagator", &mt)?;
            }
            o.json(
                "build",
                &json!({
                    "meta": meta("build", started),
                    "map": [m.a, m.b, m.c, m.d], "n": n, "kappa": [k1, k2], "seed": s.seed,
                    "origin": origin.as_str(), "check_degree": check_degree,
                    "unitarity_residual": p.unitarity_residual, "egorov_residual": p.egorov_residual, "egorov_check": eg,
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
        Command::Spectrum { space: s, n, basis_seed, cluster_tol } => {
            let m = parse_map(&s.map)?;
            let tol = cluster_tol.unwrap_or(DEFAULT_CLUSTER_TOL);
            if !(tol > 0.0) {
                bail!("cluster_tol: must be positive");
            }
            let params = space(&m, n, parse_kappa(&s.kappa)?)?;
            let (p, _) = Cache::resolve(cache_dir, no_cache).propagator(&params, &m, s.seed)?;
            let e = eigendecompose(&p, basis_seed, tol)?;
            let mut cluster_of = vec![0usize; n];
            for (c, members) in e.clusters.iter().enumerate() {
                for &j in members {
                    cluster_of[j] = c;
                }
            }
            let mut t = Table::new(&["j", "phase", "cluster"]);
            for (j, ph) in e.eigenphases.iter().enumerate() {
                t.push(vec![j.to_string(), real(*ph), cluster_of[j].to_string()]);
            }
            let per = period(&m, n as u64);
            eprintln!("clusters {} max_cluster {} period {}", e.clusters.len(), e.max_cluster_size(), per);
            let mut o = Outputs::new(out);
            o.csv("spectrum", &t)?;
            o.json(
                "spectrum",
                &json!({
                    "meta": meta("spectrum", started),
                    "map": [m.a, m.b, m.c, m.d], "n": n, "kappa": params.kappa(), "seed": s.seed, "basis_seed": basis_seed,
                    "cluster_tol": tol, "clusters": e.clusters.len(), "max_cluster": e.max_cluster_size(),
                    "cluster_sizes": e.clusters.iter().map(|c| c.len()).collect::<Vec<_>>(), "period": per,
                    "eigen_residual": e.eigen_residual(p.u.as_ref()),
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
        Command::Moments { space: s, n, degree, p, basis } => {
            let m = parse_map(&s.map)?;
            let ns: Vec<usize> = parse_list("n", &n)?;
            let ps: Vec<f64> = parse_list("p", &p)?;
            if let Some(x) = ps.iter().find(|x| !(**x >= 1.0)) {
                bail!("p: {x} < 1");
            }
            if degree == 0 {
                bail!("degree: must be positive");
            }
            let kind = parse_basis(&basis)?;
            let kappa = parse_kappa(&s.kappa)?;
            let spaces = ns.iter().map(|&n| space(&m, n, kappa)).collect::<Result<Vec<_>>>()?;
            let cache = Cache::resolve(cache_dir, no_cache);
            let mut t = Table::new(&["n_dim", "n1", "n2", "p", "value", "basis"]);
            for params in &spaces {
                let (prop, _) = cache.propagator(params, &m, s.seed)?;
                let e = basis_for(&prop, &kind)?;
                let tab = matrix_elements(&e, degree, &kind.id());
                for &mode in tab.modes() {
                    for &pw in &ps {
                        t.push(vec![params.n().to_string(), mode.0.to_string(), mode.1.to_string(), real(pw), real(moment(&tab, mode, pw)?), kind.id()]);
                    }
                }
            }
            let mut o = Outputs::new(out);
            o.csv("moments", &t)?;
            o.json(
                "moments",
                &json!({
                    "meta": meta("moments", started), "map": [m.a, m.b, m.c, m.d], "n": ns, "degree": degree, "p": ps,
                    "basis": to_json(&kind)?, "seed": s.seed,
                    "kappa": spaces.iter().map(|x| x.kappa()).collect::<Vec<_>>(),
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
        Command::Qescan { config: path } => {
            let file: config::QeFile = read_toml(&path)?;
            file.experiment.validate()?;
            let cache = Cache::resolve(cache_dir.or(file.cache_dir.clone()), no_cache);
            let mut provider = |p: &_, m: &_, seed| cache.propagator(p, m, seed).map(|x| x.0).map_err(|e| catlab::CatError::Decomposition(format!("{e:#}")));
            let report = qe_experiment(&file.experiment, &mut provider)?;
            let mut states = Table::new(&["n_dim", "j", "sign", "grid_max", "margin", "holder_sup", "upper", "exceptional"]);
            let sups_mark = |set: &catlab::stats::scan::ExceptionalSet, j: usize| set.members.binary_search(&j).is_ok();
            for scan in &report.scans {
                for (sign, set) in [("minus", &scan.minus), ("plus", &scan.plus)] {
                    for j in 0..set.upper.len() {
                        states.push(vec![
                            scan.n_dim.to_string(),
                            j.to_string(),
                            sign.to_string(),
                            real(set.grid_max[j]),
                            real(set.margin[j]),
                            real(set.holder_sup[j]),
                            real(set.upper[j]),
                            sups_mark(set, j).to_string(),
                        ]);
                    }
                }
            }
            let mut summary = Table::new(&[
                "n_dim", "kappa1", "kappa2", "radius", "degree", "threshold", "period", "ehrenfest_time", "density_minus",
                "density_plus", "union_density", "bound_minus", "bound_plus", "max_sup_minus", "max_sup_plus", "holder_chain_ok",
            ]);
            for r in &report.rows {
                summary.push(vec![
                    r.n.to_string(), real(r.kappa[0]), real(r.kappa[1]), real(r.radius), r.degree.to_string(), real(r.threshold),
                    r.period.to_string(), real(r.ehrenfest_time), real(r.density_minus), real(r.density_plus),
                    real(r.union_density), real(r.bound_minus), real(r.bound_plus), real(r.max_sup_minus),
                    real(r.max_sup_plus), r.holder_chain_ok.to_string(),
                ]);
            }
            let mut o = Outputs::new(out.or(file.output_dir.clone()));
            o.csv("qescan", &states)?;
            o.csv("qescan_summary", &summary)?;
            o.json(
                "qescan",
                &json!({
                    "meta": meta("qescan", started),
                    "config": to_json(&file.experiment)?,
                    "theorem_constants": theorem_constants(),
                    "gamma": report.gamma, "alpha_max": report.alpha_max,
                    "rows": to_json(&report.rows)?,
                    "non_increasing": report.non_increasing, "final_density": report.final_density, "bounds_hold": report.bounds_hold,
                }),
            )?;
            o.commit()?;
            emit(&summary)
        }
        Command::Physscan { config: path } => {
            let file: config::PhysFile = read_toml(&path)?;
            let c = &file.experiment;
            let m = c.validate()?;
            let params = space(&m, c.n, c.kappa)?;
            let pair = catlab::bsapprox::interval_pair(c.radius, c.degree)?;
            let cache = Cache::resolve(cache_dir.or(file.cache_dir.clone()), no_cache);
            let (p, _) = cache.propagator(&params, &m, c.build_seed)?;
            let e = basis_for(&p, &c.basis)?;
            let mut t = Table::new(&["n_dim", "j", "q", "lower", "mass", "upper", "holds"]);
            let mut violations = 0usize;
            let mut worst = f64::NEG_INFINITY;
            let states: Vec<_> = (0..e.len()).map(|j| e.state(j)).collect();
            let profiles = (0..c.q_points)
                .map(|i| MassProfile::new(&pair, &params, i as f64 / c.q_points as f64))
                .collect::<catlab::Result<Vec<_>>>()?;
            for (j, psi) in states.iter().enumerate() {
                for (i, prof) in profiles.iter().enumerate() {
                    let q = i as f64 / c.q_points as f64;
                    let s = prof.apply(psi);
                    let holds = s.holds(1e-10);
                    violations += usize::from(!holds);
                    worst = worst.max((s.lower - s.mass).max(s.mass - s.upper));
                    t.push(vec![c.n.to_string(), j.to_string(), real(q), real(s.lower), real(s.mass), real(s.upper), holds.to_string()]);
                }
            }
            let mut o = Outputs::new(out.or(file.output_dir.clone()));
            o.csv("physscan", &t)?;
            o.json(
                "physscan",
                &json!({
                    "meta": meta("physscan", started), "config": to_json(c)?, "kappa": params.kappa(),
                    "pair_certified": pair.certified, "violations": violations, "worst_excess": worst,
                    "basis_seed": e.basis_seed,
                }),
            )?;
            o.commit()?;
            eprintln!("violations {violations} of {}", t.len());
            Ok(())
        }
        Command::Hecke { space: s, n, cap, generators, degree, basis_seed } => {
            let m = parse_map(&s.map)?;
            if generators == 0 {
                bail!("generators: must be positive");
            }
            let params = space(&m, n, parse_kappa(&s.kappa)?)?;
            let (p, _) = Cache::resolve(cache_dir, no_cache).propagator(&params, &m, s.seed)?;
            let elements = hecke_generators(&m, n, generators, cap);
            if elements.is_empty() {
                bail!("cap: no commutant elements beyond the identity and the map within cap {cap}");
            }
            let family = elements.iter().map(|b| quantize_commutant(&params, b, &p)).collect::<catlab::Result<Vec<_>>>()?;
            let lifts: Vec<_> = family.iter().map(|g| [g.lift.a, g.lift.b, g.lift.c, g.lift.d]).collect();
            let h = hecke_basis(&p, family, basis_seed, 8, DEFAULT_CLUSTER_TOL)?;
            let id = format!("hecke:{generators}:{cap}:{basis_seed}");
            let tab = matrix_elements(&h.joint_basis, degree, &id);
            let mut t = Table::new(&["n_dim", "n1", "n2", "p", "value", "basis"]);
            for &mode in tab.modes() {
                for pw in [2.0, 4.0] {
                    t.push(vec![n.to_string(), mode.0.to_string(), mode.1.to_string(), real(pw), real(moment(&tab, mode, pw)?), id.clone()]);
                }
            }
            let mut o = Outputs::new(out);
            o.csv("hecke", &t)?;
            o.json(
                "hecke",
                &json!({
                    "meta": meta("hecke", started), "map": [m.a, m.b, m.c, m.d], "n": n, "kappa": params.kappa(), "seed": s.seed,
                    "cap": cap, "basis_seed": h.joint_basis.basis_seed,
                    "generators": elements.iter().map(|b| [b.a, b.b, b.c, b.d]).collect::<Vec<_>>(),
                    "generator_orders": elements.iter().map(|b| b.order()).collect::<Vec<_>>(),
                    "lifts": lifts, "commutation_residuals": h.commutation_residuals, "joint_residual": h.joint_residual,
                    "clusters": h.joint_basis.clusters.len(),
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
        Command::MajorantCheck { r, degree, dim, grid } => {
            if dim != 1 && dim != 2 {
                bail!("dim: must be 1 or 2, got {dim}");
            }
            let g = grid.unwrap_or_else(|| default_grid(dim));
            if g == 0 {
                bail!("grid: must be positive");
            }
            let mut pair = sandwich_pair(dim, r, degree)?;
            certify(&mut pair, g);
            let mut t = Table::new(&[
                "dim", "r", "degree", "certified", "grid", "violations", "grid_margin", "lipschitz_certified_fraction",
                "minorant_mean", "majorant_mean", "volume", "mean_error", "mean_error_constant", "minorant_trivial", "majorant_trivial",
            ]);
            t.push(vec![
                dim.to_string(), real(r), degree.to_string(), pair.certified.to_string(), g.to_string(), pair.grid_violations.to_string(),
                real(pair.grid_margin), real(pair.lipschitz_certified_fraction), real(pair.minorant.mean().re),
                real(pair.majorant.mean().re), real(pair.volume()), real(pair.mean_error()), real(pair.mean_error_constant()),
                pair.minorant_info.trivial.to_string(), pair.majorant_info.trivial.to_string(),
            ]);
            let mut o = Outputs::new(out);
            o.csv("majorant_check", &t)?;
            o.json(
                "majorant_check",
                &json!({
                    "meta": meta("majorant-check", started),
                    "minorant": to_json(&pair.minorant_info)?, "majorant": to_json(&pair.majorant_info)?,
                    "certified": pair.certified, "coefficient_constant": pair.coefficient_constant(),
                }),
            )?;
            o.commit()?;
            emit(&t)
        }
    }
}

fn theorem_constants() -> Value {
    json!({
        "log_physical_alpha_max": experiment::LOG_PHYSICAL_ALPHA_MAX,
        "log_qe_alpha_max": experiment::LOG_QE_ALPHA_MAX,
        "poly_physical_alpha_max": experiment::POLY_PHYSICAL_ALPHA_MAX,
        "poly_qe_alpha_max": experiment::POLY_QE_ALPHA_MAX,
        "hecke_physical_alpha_max": experiment::HECKE_PHYSICAL_ALPHA_MAX,
        "hecke_qe_alpha_max": experiment::HECKE_QE_ALPHA_MAX,
        "theorems": [Theorem::LogPhysical, Theorem::LogQe, Theorem::PolyPhysical, Theorem::PolyQe, Theorem::HeckePhysical, Theorem::HeckeQe],
    })
}
