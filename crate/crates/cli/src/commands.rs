//! Subcommand implementations. Every output CSV starts with a comment line
//! `# config_hash=<hash> seed=<seed>` so runs can be reproduced exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use sgmlab::constants::{self, ConstantsReport};
use sgmlab::error::{Error, Result};
use sgmlab::sampler::{self, OracleKind, ScoreOracle, SgmConfig};
use sgmlab::verify::{self, CheckReport, SuiteOptions};
use sgmlab::wasserstein;
use sgmlab::{ProcessTag, SampleBatch};

use crate::config::Experiment;

fn provenance(exp: &Experiment) -> String {
    format!("config_hash={} seed={}", exp.config_hash, exp.cfg.seed)
}

fn out_dir(exp: &Experiment, flag: Option<&Path>) -> Result<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| exp.cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn report(exp: &Experiment) -> Result<ConstantsReport> {
    let m2 = exp.mixture.second_moment();
    let w2_init = constants::w2_init_analytic(m2, exp.mixture.dim());
    ConstantsReport::build(
        exp.params,
        &exp.grid,
        exp.cfg.eps,
        exp.mixture.dim(),
        m2,
        w2_init,
    )
}

/// `constants`: resolve all derived quantities and print them.
pub fn cmd_constants(exp: &Experiment, csv: bool) -> Result<String> {
    let rep = report(exp).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!(
            "{msg}; the scheme needs h < 2/(9 L^2), see the constant step-size condition"
        )),
        other => other,
    })?;
    let mut out = String::new();
    if csv {
        let (header, row) = rep.to_csv();
        out.push_str(&format!("# {}\n{header}\n{row}\n", provenance(exp)));
    } else {
        out.push_str(&format!("# {}\n", provenance(exp)));
        out.push_str(&rep.to_key_value_block());
    }
    Ok(out)
}

/// `sample`: run the generative scheme, write endpoint samples as CSV.
pub fn cmd_sample(exp: &Experiment, out_flag: Option<&Path>) -> Result<PathBuf> {
    let oracle = ScoreOracle {
        mixture: &exp.mixture,
        kind: exp.cfg.oracle_kind(),
    };
    let cfg = SgmConfig {
        grid: exp.grid,
        init: exp.cfg.init_kind(),
        n: exp.cfg.n_samples,
        seed: exp.cfg.seed,
        params: exp.params,
    };
    let batch = sampler::run_sgm(&oracle, &cfg)?;
    let dir = out_dir(exp, out_flag)?;
    let path = dir.join("samples.csv");
    let mut buf = Vec::new();
    batch.write_csv(&mut buf, Some(&provenance(exp)))?;
    write_file(&path, std::str::from_utf8(&buf).unwrap())?;
    Ok(path)
}

/// `coupling`: run the synchronously coupled processes, write per-step
/// distances with the predicted contraction factors.
pub fn cmd_coupling(exp: &Experiment, out_flag: Option<&Path>) -> Result<PathBuf> {
    let oracle = ScoreOracle {
        mixture: &exp.mixture,
        kind: if exp.cfg.eps > 0.0 {
            OracleKind::Perturbed {
                eps: exp.cfg.eps,
                mode: exp.cfg.perturb_kind(),
            }
        } else {
            OracleKind::Exact
        },
    };
    let run = sampler::run_coupled(
        &exp.mixture,
        &oracle,
        &exp.grid,
        &exp.params,
        exp.cfg.n_samples,
        exp.cfg.seed,
        exp.cfg.fine_factor,
    )?;
    let mut out = String::new();
    out.push_str(&format!(
        "# {} init_dist_achieved={} init_dist_bound={} n_h={}\n",
        provenance(exp),
        run.init_dist_achieved,
        run.init_dist_bound,
        run.n_h
    ));
    out.push_str("k,t_k,dist_fine_em,dist_em_init,dist_init_star,delta_k_pred\n");
    for k in 0..=exp.grid.n_steps() {
        let delta = if k < exp.grid.n_steps() {
            format!("{}", run.delta_pred[k])
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{k},{},{},{},{},{delta}\n",
            exp.grid.node(k),
            run.dist_fine_em[k],
            run.dist_em_init[k],
            run.dist_init_star[k]
        ));
    }
    let dir = out_dir(exp, out_flag)?;
    let path = dir.join("coupling.csv");
    write_file(&path, &out)?;
    Ok(path)
}

/// `verify`: run the full check suite; returns the reports and the CSV path.
pub fn cmd_verify(
    exp: &Experiment,
    out_flag: Option<&Path>,
) -> Result<(Vec<CheckReport>, PathBuf)> {
    let opts = SuiteOptions {
        seed: exp.cfg.seed,
        ..SuiteOptions::default()
    };
    let reports = verify::full_suite(&exp.mixture, &exp.params, &exp.grid, &opts)?;
    let mut out = String::new();
    out.push_str(&format!("# {}\n", provenance(exp)));
    out.push_str(CheckReport::csv_header());
    out.push('\n');
    for r in &reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    let dir = out_dir(exp, out_flag)?;
    let path = dir.join("verify.csv");
    write_file(&path, &out)?;
    Ok((reports, path))
}

/// `w2`: distance between two CSV batches, one CSV line on stdout.
pub fn cmd_w2(
    a_path: &Path,
    b_path: &Path,
    method: &str,
    nproj: usize,
    seed: u64,
) -> Result<String> {
    let a = read_batch(a_path)?;
    let b = read_batch(b_path)?;
    let (est, se) = match method {
        "exact" => {
            let e = wasserstein::w2_exact_matching(&a, &b)?;
            let m = a.n().min(512);
            let se = wasserstein::bootstrap_se(&a, &b, m, 50, seed, |x, y| {
                Ok(wasserstein::w2_exact_matching(x, y)?.value)
            })?;
            (e, se)
        }
        "sliced" => {
            let e = wasserstein::w2_sliced(&a, &b, nproj, seed)?;
            let se = wasserstein::bootstrap_se(&a, &b, a.n(), 50, seed, |x, y| {
                Ok(wasserstein::w2_sliced(x, y, nproj, seed)?.value)
            })?;
            (e, se)
        }
        "exact-1d" => {
            if a.dim() != 1 || b.dim() != 1 {
                return Err(Error::invalid("exact-1d needs one-dimensional batches"));
            }
            let e = wasserstein::w2_1d_exact(a.as_slice(), b.as_slice())?;
            let se = wasserstein::bootstrap_se(&a, &b, a.n(), 50, seed, |x, y| {
                Ok(wasserstein::w2_1d_exact(x.as_slice(), y.as_slice())?.value)
            })?;
            (e, se)
        }
        other => return Err(Error::invalid(format!("unknown w2 method {other:?}"))),
    };
    Ok(format!(
        "method,value,se,n,nproj,seed\n{},{},{},{},{},{}\n",
        est.method.as_str(),
        est.value,
        se,
        est.n,
        est.nproj,
        seed
    ))
}

fn read_batch(path: &Path) -> Result<SampleBatch> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    SampleBatch::read_csv(std::io::BufReader::new(f), ProcessTag::Data)
}

/// `sweep`: bound vs empirical error over the (h, T, eps) grid. Cells with an
/// inadmissible step size become warning rows instead of failing the run.
pub fn cmd_sweep(exp: &Experiment, out_flag: Option<&Path>) -> Result<PathBuf> {
    let sweep = exp
        .cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep subcommand needs a [sweep] section"))?;
    let m2 = exp.mixture.second_moment();
    let dim = exp.mixture.dim();
    let w2_init = constants::w2_init_analytic(m2, dim);
    let l = constants::uniform_l(&exp.params);
    let hm = constants::h_max(l)?;
    let n = exp.cfg.n_samples;
    let cap = exp.cfg.w2_cap.min(wasserstein::EXACT_MATCHING_CAP);

    let mut out = String::new();
    out.push_str(&format!("# {}\n", provenance(exp)));
    out.push_str("h,T,eps,w2_exact,w2_exact_se,w2_sliced,bound,ratio\n");
    for &t in &sweep.t_horizon {
        for &h in &sweep.step {
            for &eps in &sweep.eps {
                if h >= hm {
                    out.push_str(&format!(
                        "# warning: skipped cell h={h} T={t} eps={eps}: h >= h_max = {hm}\n"
                    ));
                    continue;
                }
                let grid = sgmlab::TimeGrid::from_step(t, h)?;
                let oracle = ScoreOracle {
                    mixture: &exp.mixture,
                    kind: if eps > 0.0 {
                        OracleKind::Perturbed {
                            eps,
                            mode: exp.cfg.perturb_kind(),
                        }
                    } else {
                        OracleKind::Exact
                    },
                };
                let cfg = SgmConfig {
                    grid,
                    init: exp.cfg.init_kind(),
                    n,
                    seed: exp.cfg.seed,
                    params: exp.params,
                };
                let output = sampler::run_sgm(&oracle, &cfg)?;
                let reference = exp.mixture.sample(n, exp.cfg.seed.wrapping_add(1))?;
                let out_cap = truncate(&output, cap)?;
                let ref_cap = truncate(&reference, cap)?;
                let w2_exact = wasserstein::w2_exact_matching(&out_cap, &ref_cap)?.value;
                let se = wasserstein::bootstrap_se(
                    &out_cap,
                    &ref_cap,
                    out_cap.n().min(512),
                    50,
                    exp.cfg.seed,
                    |x, y| Ok(wasserstein::w2_exact_matching(x, y)?.value),
                )?;
                let w2_sliced =
                    wasserstein::w2_sliced(&output, &reference, exp.cfg.w2_nproj, exp.cfg.seed)?
                        .value;
                let bound = constants::w2_bound(
                    &exp.params,
                    t,
                    grid.h(),
                    eps,
                    dim,
                    m2,
                    w2_init,
                    constants::BoundVariant::Standard,
                )?;
                out.push_str(&format!(
                    "{h},{t},{eps},{w2_exact},{se},{w2_sliced},{bound},{}\n",
                    w2_exact / bound
                ));
            }
        }
    }
    let dir = out_dir(exp, out_flag)?;
    let path = dir.join("sweep.csv");
    write_file(&path, &out)?;
    Ok(path)
}

fn truncate(batch: &SampleBatch, cap: usize) -> Result<SampleBatch> {
    if batch.n() <= cap {
        return Ok(batch.clone());
    }
    let data: Vec<f64> = batch.as_slice()[..cap * batch.dim()].to_vec();
    SampleBatch::new(data, cap, batch.dim(), batch.seed, batch.tag)
}
