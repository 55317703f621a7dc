//! Config-driven experiment runner: every check in the library is exposed as
//! a subcommand reading a flat key=value config and writing schema-versioned
//! CSV plus a run manifest. Outputs are deterministic given the seed; sweep
//! rows are computed in parallel but written in declared key order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use crate::chaos::taylor_reconstruct;
use crate::current::{divergence_probe, gamma_identity_check, membership, CurrentEvaluator, CurrentSpec};
use crate::error::{Error, Result};
use crate::frac_ops::HurstParam;
use crate::gaussian::sample_fbm_paths;
use crate::par::map_indexed;
use crate::rng::splitmix64;
use crate::stransform::{donsker_s, donsker_s_truncated, mc_donsker_s, DonskerSpec, TestFunction};

pub const SUBCOMMANDS: [&str; 8] = [
    "membership",
    "stransform",
    "current",
    "chaos-reconstruct",
    "mc-verify",
    "gamma-check",
    "fbm-sample",
    "divergence-probe",
];

/// Exit code contract: 0 success, 2 invalid input, 3 numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } | Error::Evaluation(_) => 3,
        _ => 2,
    }
}

// ---------------------------------------------------------------- config --

/// One parsed config section with consumed-key tracking so unknown keys are
/// rejected after the runner has pulled everything it understands.
struct Params {
    map: BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl Params {
    fn get(&self, key: &str) -> Option<&str> {
        let v = self.map.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Precondition(format!("missing required key '{key}'")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.require(key)?)
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        let mut vals = raw
            .split(',')
            .map(|s| parse_f64(key, s.trim()))
            .collect::<Result<Vec<_>>>()?;
        if vals.is_empty() {
            return Err(Error::Precondition(format!("key '{key}' must list at least one value")));
        }
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        if self.map.contains_key(key) {
            self.f64_list(key)
        } else {
            Ok(default)
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.require(key)?
            .parse()
            .map_err(|_| Error::Precondition(format!("key '{key}' must be a nonnegative integer")))
    }

    fn u32_opt(&self, key: &str) -> Result<Option<u32>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Precondition(format!("key '{key}' must be a nonnegative integer")))
            })
            .transpose()
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Precondition(format!("key '{key}' must be a u64")))
            })
            .transpose()
    }

    /// space-separated point, e.g. `x = 0.5 -0.3`
    fn point(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        let vals = raw
            .split_whitespace()
            .map(|s| parse_f64(key, s))
            .collect::<Result<Vec<_>>>()?;
        if vals.is_empty() {
            return Err(Error::Precondition(format!("key '{key}' must have at least one component")));
        }
        Ok(vals)
    }

    /// phi1..phiD: colon-separated Hermite coefficients per component;
    /// missing components are zero.
    fn phi(&self, d: usize) -> Result<TestFunction> {
        let mut comps = vec![Vec::new(); d];
        for j in 1..=d {
            let key = format!("phi{j}");
            if let Some(raw) = self.get(&key) {
                comps[j - 1] = raw
                    .split(':')
                    .map(|s| parse_f64(&key, s.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
        }
        TestFunction::from_hermite(comps)
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !used.contains(*k))
            .map(|k| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.parse()
        .map_err(|_| Error::Precondition(format!("key '{key}': '{raw}' is not a number")))
}

/// Parse the flat key=value config; exactly one section, named after the
/// subcommand.
fn parse_config(text: &str, subcommand: &str) -> Result<Params> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = line[1..line.len() - 1].trim().to_string();
            if sections.contains_key(&name) {
                return Err(Error::Precondition(format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Precondition(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            return Err(Error::Precondition(format!(
                "line {}: key before any [section] header",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let map = sections.get_mut(section).unwrap();
        if map.contains_key(&key) {
            return Err(Error::Precondition(format!("duplicate key '{key}' in [{section}]")));
        }
        map.insert(key, value.trim().to_string());
    }
    for name in sections.keys() {
        if name != subcommand {
            return Err(Error::Precondition(format!(
                "unknown section [{name}]; expected [{subcommand}]"
            )));
        }
    }
    let map = sections.remove(subcommand).ok_or_else(|| {
        Error::Precondition(format!("config has no [{subcommand}] section"))
    })?;
    Ok(Params {
        map,
        used: std::cell::RefCell::new(BTreeSet::new()),
    })
}

// ---------------------------------------------------------------- output --

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

struct RunOutput {
    header: &'static str,
    rows: Vec<String>,
    notes: Vec<(String, String)>,
}

fn write_artifacts(
    out_dir: &Path,
    subcommand: &str,
    seed: Option<u64>,
    config_path: &Path,
    params: &Params,
    output: &RunOutput,
    wall_ms: u128,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{subcommand}.csv"));
    let mut csv = String::new();
    writeln!(csv, "# schema=1").unwrap();
    writeln!(csv, "{}", output.header).unwrap();
    for row in &output.rows {
        writeln!(csv, "{row}").unwrap();
    }
    std::fs::write(&csv_path, csv)?;
    let mut manifest = String::new();
    writeln!(manifest, "status=ok").unwrap();
    writeln!(manifest, "subcommand={subcommand}").unwrap();
    writeln!(manifest, "version={}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(manifest, "config={}", config_path.display()).unwrap();
    if let Some(s) = seed {
        writeln!(manifest, "seed={s}").unwrap();
    }
    for (k, v) in &params.map {
        writeln!(manifest, "param.{k}={v}").unwrap();
    }
    for (k, v) in &output.notes {
        writeln!(manifest, "note.{k}={v}").unwrap();
    }
    writeln!(manifest, "wall_ms={wall_ms}").unwrap();
    std::fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// On numerical failure still leave a manifest flagging the partial run.
fn write_failure_manifest(out_dir: &Path, subcommand: &str, e: &Error) {
    if std::fs::create_dir_all(out_dir).is_err() {
        return;
    }
    let body = format!("status=failed\nsubcommand={subcommand}\nerror={e}\n");
    let _ = std::fs::write(out_dir.join("manifest.txt"), body);
}

// --------------------------------------------------------------- runners --

fn opt_str<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_membership(p: &Params) -> Result<RunOutput> {
    let x = p.point("x")?;
    let hs = p.f64_list("h")?;
    let ns: Vec<Option<u32>> = match p.get("n") {
        None => vec![None],
        Some(raw) => {
            let mut ns = raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Precondition("key 'n' must list nonnegative integers".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            ns.sort_unstable();
            ns.into_iter().map(Some).collect()
        }
    };
    p.finish()?;
    let mut rows = Vec::new();
    for &hv in &hs {
        let h = HurstParam::new(hv)?;
        for &n in &ns {
            let v = membership(&x, h, n);
            rows.push(format!(
                "{hv},{},{},{},{},{}",
                x.len(),
                opt_str(n),
                v.member,
                v.rule.label(),
                v.slack.map(fmt).unwrap_or_default()
            ));
        }
    }
    Ok(RunOutput {
        header: "h,d,n,member,rule,slack",
        rows,
        notes: vec![],
    })
}

fn z_grid(p: &Params) -> Result<Vec<Complex64>> {
    let res = p.f64_list_or("z_re", vec![1.0])?;
    let ims = p.f64_list_or("z_im", vec![0.0])?;
    let mut zs = Vec::with_capacity(res.len() * ims.len());
    for &re in &res {
        for &im in &ims {
            zs.push(Complex64::new(re, im));
        }
    }
    Ok(zs)
}

fn run_stransform(p: &Params) -> Result<RunOutput> {
    let x = p.point("x")?;
    let d = x.len();
    let hs = p.f64_list("h")?;
    let t = p.f64("t")?;
    let n = p.u32_opt("n")?;
    let phi = p.phi(d)?;
    let zs = z_grid(p)?;
    p.finish()?;
    let mut grid = Vec::new();
    for &hv in &hs {
        for &z in &zs {
            grid.push((hv, z));
        }
    }
    let rows = map_indexed(grid.len(), |k| -> Result<String> {
        let (hv, z) = grid[k];
        let spec = {
            let s = DonskerSpec::new(x.clone(), HurstParam::new(hv)?, t)?;
            match n {
                Some(n) => s.with_truncation(n),
                None => s,
            }
        };
        let v = match n {
            Some(_) => donsker_s_truncated(&spec, z, &phi)?,
            None => donsker_s(&spec, z, &phi)?,
        };
        Ok(format!(
            "{hv},{t},{d},{},{},{},{},{}",
            opt_str(n),
            z.re,
            z.im,
            fmt(v.re),
            fmt(v.im)
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        header: "h,t,d,n,z_re,z_im,s_re,s_im",
        rows,
        notes: vec![],
    })
}

fn current_spec(p: &Params) -> Result<(CurrentSpec, TestFunction)> {
    let x = p.point("x")?;
    let d = x.len();
    let h = HurstParam::new(p.f64("h")?)?;
    let horizon = p.f64("horizon")?;
    let i = p.usize("i")?;
    if i < 1 || i > d {
        return Err(Error::Precondition(format!("component index i={i} out of 1..={d}")));
    }
    let phi = p.phi(d)?;
    let spec = CurrentSpec::new(x, h, horizon, i - 1)?;
    let spec = match p.u32_opt("n")? {
        Some(n) => spec.with_truncation(n)?,
        None => spec,
    };
    Ok((spec, phi))
}

fn run_current(p: &Params) -> Result<RunOutput> {
    let (spec, phi) = current_spec(p)?;
    let zs = z_grid(p)?;
    p.finish()?;
    let ev = CurrentEvaluator::new(spec.clone(), phi)?;
    let verdict = *ev.verdict();
    let rows = map_indexed(zs.len(), |k| -> Result<String> {
        let z = zs[k];
        let v = match spec.truncation {
            Some(_) => ev.s_value_truncated(z)?,
            None => ev.s_value(z)?,
        };
        Ok(format!(
            "{},{},{},{},{},{},{},{},{},{}",
            spec.h.value(),
            spec.d(),
            spec.i + 1,
            opt_str(spec.truncation),
            z.re,
            z.im,
            fmt(v.re),
            fmt(v.im),
            verdict.rule.label(),
            verdict.slack.map(fmt).unwrap_or_default()
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        header: "h,d,i,n,z_re,z_im,value_re,value_im,rule,slack",
        rows,
        notes: vec![],
    })
}

fn run_chaos_reconstruct(p: &Params) -> Result<RunOutput> {
    let (spec, phi) = current_spec(p)?;
    let max_order = p.usize("max_order")? as u32;
    p.finish()?;
    let report = taylor_reconstruct(&spec, phi, max_order)?;
    let rows = report
        .orders
        .iter()
        .zip(report.partial_sums.iter().zip(report.errors.iter()))
        .map(|(m, (s, e))| format!("{m},{},{},{}", fmt(*s), fmt(report.target), fmt(*e)))
        .collect();
    Ok(RunOutput {
        header: "order,partial_sum,target,error",
        rows,
        notes: vec![],
    })
}

fn run_mc_verify(p: &Params, seed: u64) -> Result<RunOutput> {
    let x = p.point("x")?;
    let d = x.len();
    let h = HurstParam::new(p.f64("h")?)?;
    let t = p.f64("t")?;
    let n_samples = p.usize("n_samples")?;
    let phi = p.phi(d)?;
    let zs = p.f64_list_or("z", vec![1.0])?;
    p.finish()?;
    let spec = DonskerSpec::new(x, h, t)?;
    let rows = map_indexed(zs.len(), |k| -> Result<String> {
        let z = zs[k];
        let closed = donsker_s(&spec, Complex64::new(z, 0.0), &phi)?;
        let (est, se) = mc_donsker_s(&spec, z, &phi, n_samples, splitmix64(seed ^ k as u64))?;
        let diff = (est.re - closed.re).abs();
        let sigmas = if se > 0.0 { diff / se } else { f64::INFINITY };
        Ok(format!(
            "{},{t},{d},{z},{},{},{},{},{}",
            h.value(),
            fmt(closed.re),
            fmt(est.re),
            fmt(se),
            fmt(diff),
            fmt(sigmas)
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        header: "h,t,d,z,closed_re,mc_estimate,mc_se,abs_diff,sigmas",
        rows,
        notes: vec![],
    })
}

fn run_gamma_check(p: &Params) -> Result<RunOutput> {
    let x = p.point("x")?;
    let hs = p.f64_list("h")?;
    let horizon = p.f64("horizon")?;
    p.finish()?;
    let rows = map_indexed(hs.len(), |k| -> Result<String> {
        let hv = hs[k];
        let r = gamma_identity_check(&x, HurstParam::new(hv)?, horizon)?;
        Ok(format!(
            "{hv},{},{},{},{},{}",
            x.len(),
            fmt(r.lhs),
            fmt(r.rhs),
            fmt(r.residual),
            r.negligible
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        header: "h,d,lhs,rhs,residual,negligible",
        rows,
        notes: vec![],
    })
}

fn run_fbm_sample(p: &Params, seed: u64) -> Result<RunOutput> {
    let h = HurstParam::new(p.f64("h")?)?;
    let horizon = p.f64("horizon")?;
    let n_steps = p.usize("n_steps")?;
    let n_paths = p.usize("n_paths")?;
    let d = p.usize("d")?;
    p.finish()?;
    let batch = sample_fbm_paths(h, horizon, n_steps, n_paths, d, seed)?;
    let mut buf = Vec::new();
    batch.write_csv(&mut buf)?;
    let body = String::from_utf8(buf).expect("csv body is ascii");
    let rows = body.lines().map(|l| l.to_string()).collect();
    Ok(RunOutput {
        header: "path_id,step,t,component,value",
        rows,
        notes: vec![(
            "dense_fallback".to_string(),
            batch.used_dense_fallback.to_string(),
        )],
    })
}

fn run_divergence_probe(p: &Params) -> Result<RunOutput> {
    let h = HurstParam::new(p.f64("h")?)?;
    let d = p.usize("d")?;
    let horizon = p.f64("horizon")?;
    let n = p.u32_opt("n")?;
    let mut cutoffs = p.f64_list("cutoffs")?;
    p.finish()?;
    cutoffs.reverse(); // f64_list sorts ascending; the probe wants decreasing
    let spec = CurrentSpec::new(vec![0.0; d], h, horizon, 0)?;
    let spec = match n {
        Some(n) => spec.with_truncation(n)?,
        None => spec,
    };
    let r = divergence_probe(&spec, &cutoffs)?;
    let kind = match r.kind {
        crate::current::DivergenceKind::LogDivergence => "log_divergence",
        crate::current::DivergenceKind::PowerDivergence => "power_divergence",
        crate::current::DivergenceKind::Convergent => "convergent",
    };
    let rows = r
        .cutoffs
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            format!(
                "{eps},{},{},{},{},{kind}",
                fmt(r.integrals[k]),
                r.fitted_exponents.get(k).map(|&e| fmt(e)).unwrap_or_default(),
                fmt(r.envelope_exponent),
                fmt(r.predicted)
            )
        })
        .collect();
    Ok(RunOutput {
        header: "cutoff,integral,fitted_exponent,envelope_exponent,predicted,kind",
        rows,
        notes: vec![(
            "log_slope".to_string(),
            r.log_slope.map(|s| s.to_string()).unwrap_or_default(),
        )],
    })
}

// ------------------------------------------------------------ entry point --

/// Execute one subcommand against a config file. `seed` overrides any seed in
/// the config; `out_dir` defaults to ./out.
pub fn run(
    subcommand: &str,
    config_path: &Path,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    if !SUBCOMMANDS.contains(&subcommand) {
        return Err(Error::Precondition(format!("unknown subcommand '{subcommand}'")));
    }
    let text = std::fs::read_to_string(config_path)?;
    let params = parse_config(&text, subcommand)?;
    let config_seed = params.u64_opt("seed")?;
    let seed = seed.or(config_seed);
    let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("out"));
    let started = Instant::now();
    let result = match subcommand {
        "membership" => run_membership(&params),
        "stransform" => run_stransform(&params),
        "current" => run_current(&params),
        "chaos-reconstruct" => run_chaos_reconstruct(&params),
        "mc-verify" => run_mc_verify(&params, seed.unwrap_or(0)),
        "gamma-check" => run_gamma_check(&params),
        "fbm-sample" => run_fbm_sample(&params, seed.unwrap_or(0)),
        "divergence-probe" => run_divergence_probe(&params),
        _ => unreachable!(),
    };
    match result {
        Ok(output) => write_artifacts(
            &out_dir,
            subcommand,
            seed,
            config_path,
            &params,
            &output,
            started.elapsed().as_millis(),
        ),
        Err(e) => {
            if exit_code(&e) == 3 {
                write_failure_manifest(&out_dir, subcommand, &e);
            }
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_sections_and_rejects_unknown_keys() {
        let p = parse_config("[membership]\nx = 0 0\nh = 0.3,0.6\n", "membership").unwrap();
        assert_eq!(p.point("x").unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.f64_list("h").unwrap(), vec![0.3, 0.6]);
        p.finish().unwrap();

        let p = parse_config("[membership]\nx = 0\nbogus = 1\n", "membership").unwrap();
        p.point("x").unwrap();
        assert!(p.finish().is_err());
    }

    #[test]
    fn config_rejects_wrong_section_and_bad_lines() {
        assert!(parse_config("[other]\nx = 0\n", "membership").is_err());
        assert!(parse_config("x = 0\n", "membership").is_err());
        assert!(parse_config("[membership]\nnot a pair\n", "membership").is_err());
        assert!(parse_config("[a]\n[a]\n", "a").is_err());
    }

    #[test]
    fn phi_keys_build_test_function() {
        let p = parse_config("[stransform]\nphi1 = 0.5:0.25\n", "stransform").unwrap();
        let phi = p.phi(2).unwrap();
        assert_eq!(phi.d(), 2);
        assert!((phi.norm_sq() - (0.25 + 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn lists_sort_for_deterministic_row_order() {
        let p = parse_config("[gamma-check]\nh = 0.7,0.3,0.5\n", "gamma-check").unwrap();
        assert_eq!(p.f64_list("h").unwrap(), vec![0.3, 0.5, 0.7]);
    }
}
