//! The four subcommands.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tcdmrg::dmrg::{run_ground_state_with, RunResult, SweepSummary};
use tcdmrg::ed::{enumerate_sector, ground_energy};
use tcdmrg::hamiltonian::{hubbard, tc_hubbard};
use tcdmrg::mpo::oracle::unfolding_ranks;
use tcdmrg::mpo::{build_mpo, fh_bound, tc_bound};

use crate::config::{check_scan_lists, ExperimentConfig};
use crate::report::{fmt12, sibling, write_csv};

/// Largest ED sector handled by default, and with `--slow`.
pub const ED_CAP: u128 = 200_000;
pub const ED_CAP_SLOW: u128 = 5_000_000;

/// Largest chain for which `mpo-stats` runs the rank oracle.
const ORACLE_MAX_SITES: usize = 6;

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Finished but some result is not trustworthy; exit code 2.
    Unconverged,
}

pub const RUN_HEADER: [&str; 7] = [
    "sweep",
    "energy_total",
    "energy_per_site",
    "max_bond",
    "discarded_weight",
    "n_up",
    "n_down",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "energy_per_site",
    "energy_total",
    "sweeps",
    "converged",
    "energy_converged",
    "filling_error",
    "n_up",
    "n_down",
    "max_bond",
    "final_discarded_weight",
    "final_eigenvalue",
];

fn sweep_row(s: &SweepSummary) -> Vec<String> {
    vec![
        s.sweep.to_string(),
        fmt12(s.energy_total),
        fmt12(s.energy_per_site),
        s.max_bond.to_string(),
        fmt12(s.discarded_weight),
        fmt12(s.n_up),
        fmt12(s.n_down),
    ]
}

fn summary_row(r: &RunResult) -> Vec<String> {
    let last = r.sweeps.last().expect("at least one sweep");
    vec![
        fmt12(r.energy_per_site),
        fmt12(r.energy_total),
        r.sweeps.len().to_string(),
        r.converged.to_string(),
        r.energy_converged.to_string(),
        fmt12(r.filling_error),
        fmt12(r.n_up),
        fmt12(r.n_down),
        r.bond_dims.iter().copied().max().unwrap_or(1).to_string(),
        fmt12(last.discarded_weight),
        fmt12(r.final_eigenvalue),
    ]
}

fn log_sweep(s: &SweepSummary) {
    eprintln!(
        "sweep {:>3}  E/site {:>+.10}  max_bond {:>4}  discarded {:.2e}  N_up {:.6}  N_down {:.6}  residual {:.1e}{}",
        s.sweep,
        s.energy_per_site,
        s.max_bond,
        s.discarded_weight,
        s.n_up,
        s.n_down,
        s.max_residual,
        if s.unconverged_pairs > 0 {
            format!("  ({} pairs above Davidson tolerance)", s.unconverged_pairs)
        } else {
            String::new()
        }
    );
}

pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Status> {
    let lattice = cfg.lattice()?;
    let params = cfg.params();
    let r = run_ground_state_with(&lattice, &params, &cfg.dmrg_config(), log_sweep)?;
    let path = out_path(cfg, out, "run.csv");
    let echo = cfg.echo();
    let rows: Vec<Vec<String>> = r.sweeps.iter().map(sweep_row).collect();
    write_csv(&path, &echo, &RUN_HEADER, &rows)?;
    let summary = sibling(&path, "summary.csv");
    write_csv(&summary, &echo, &SUMMARY_HEADER, &[summary_row(&r)])?;
    let state_path = sibling(&path, "mps");
    let file = File::create(&state_path).with_context(|| format!("cannot write {}", state_path.display()))?;
    let mut w = BufWriter::new(file);
    r.state.save(&mut w)?;
    w.flush()?;
    println!(
        "energy_per_site={} energy_total={} sweeps={} converged={} n_up={} n_down={}",
        fmt12(r.energy_per_site),
        fmt12(r.energy_total),
        r.sweeps.len(),
        r.converged,
        fmt12(r.n_up),
        fmt12(r.n_down)
    );
    if r.converged {
        return Ok(Status::Ok);
    }
    if r.filling_error >= tcdmrg::dmrg::run::FILLING_TOL {
        eprintln!(
            "not converged: filling drifted, <N_up> = {:.8} (target {}), <N_down> = {:.8} (target {}); raise model.penalty_lambda",
            r.n_up, params.n_alpha, r.n_down, params.n_beta
        );
    }
    if !r.energy_converged {
        eprintln!(
            "not converged: energy still changing after {} sweeps; raise dmrg.max_sweeps",
            r.sweeps.len()
        );
    }
    Ok(Status::Unconverged)
}

fn out_path(cfg: &ExperimentConfig, out: Option<&Path>, default: &str) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

pub fn ed(cfg: &ExperimentConfig, out: Option<&Path>, slow: bool) -> Result<Status> {
    let lattice = cfg.lattice()?;
    let p = cfg.params();
    let n = lattice.n_sites();
    let dim = binomial(n, p.n_alpha) * binomial(n, p.n_beta);
    let cap = if slow { ED_CAP_SLOW } else { ED_CAP };
    if dim > cap {
        if slow {
            bail!("sector dimension {dim} exceeds the ED limit {cap}");
        }
        bail!("sector dimension {dim} exceeds the ED cap {cap}; pass --slow to raise it to {ED_CAP_SLOW}");
    }
    let basis = enumerate_sector(n, p.n_alpha, p.n_beta)?;
    let (e, residual) = ground_energy(&tc_hubbard(&lattice, &p), &basis, 1e-10)?;
    println!(
        "energy_per_site={} energy_total={} residual={:.3e} dim={}",
        fmt12(e / n as f64),
        fmt12(e),
        residual,
        basis.len()
    );
    if let Some(path) = out {
        write_csv(
            path,
            &cfg.echo(),
            &["dim", "energy_total", "energy_per_site", "residual"],
            &[vec![basis.len().to_string(), fmt12(e), fmt12(e / n as f64), fmt12(residual)]],
        )?;
    }
    Ok(Status::Ok)
}

pub fn mpo_stats(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Status> {
    let lattice = cfg.lattice()?;
    let p = cfg.params();
    let n = lattice.n_sites();
    let fh_op = hubbard(&lattice, &p);
    let tc_op = tc_hubbard(&lattice, &p);
    let fh = build_mpo(&fh_op, &lattice)?.bond_profile;
    let tc = build_mpo(&tc_op, &lattice)?.bond_profile;
    let oracle = if n <= ORACLE_MAX_SITES {
        Some((unfolding_ranks(&fh_op)?, unfolding_ranks(&tc_op)?))
    } else {
        None
    };

    let (bf, bt) = (fh_bound(n), tc_bound(n));
    let mut text = String::new();
    writeln!(
        text,
        "{:>4} {:>6} {:>6}{}  status",
        "cut",
        "FH",
        "TC",
        if oracle.is_some() { "   rank(FH) rank(TC)" } else { "" }
    )?;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for c in 0..n - 1 {
        let mut ok = fh[c] as f64 <= bf && tc[c] as f64 <= bt;
        let mut row = vec![(c + 1).to_string(), fh[c].to_string(), tc[c].to_string(), format!("{bf}"), format!("{bt}")];
        write!(text, "{:>4} {:>6} {:>6}", c + 1, fh[c], tc[c])?;
        if let Some((rf, rt)) = &oracle {
            write!(text, "   {:>8} {:>8}", rf[c], rt[c])?;
            row.push(rf[c].to_string());
            row.push(rt[c].to_string());
            ok &= rf[c] == fh[c] && rt[c] == tc[c];
        }
        let status = if ok { "pass" } else { "fail" };
        writeln!(text, "  {status}")?;
        row.push(status.into());
        rows.push(row);
        all_ok &= ok;
    }
    let (mf, mt) = (fh.iter().max().copied().unwrap_or(1), tc.iter().max().copied().unwrap_or(1));
    writeln!(text, "max bond FH {mf} (bound {bf}), TC {mt} (bound {bt})")?;
    writeln!(text, "TC/FH max-bond ratio {:.3} (reference factor 2)", mt as f64 / mf as f64)?;
    if oracle.is_some() {
        writeln!(text, "rank oracle: {}", if all_ok { "all cuts optimal" } else { "MISMATCH" })?;
    }
    print!("{text}");
    if let Some(path) = out {
        let mut header = vec!["cut", "fh_bond", "tc_bond", "fh_bound", "tc_bound"];
        if oracle.is_some() {
            header.extend(["fh_rank", "tc_rank"]);
        }
        header.push("status");
        write_csv(path, &cfg.echo(), &header, &rows)?;
    }
    Ok(if all_ok { Status::Ok } else { Status::Unconverged })
}

pub const SCAN_HEADER: [&str; 11] = [
    "m",
    "j",
    "energy_per_site",
    "energy_total",
    "sweeps",
    "converged",
    "max_bond",
    "discarded_weight",
    "n_up",
    "n_down",
    "status",
];

pub fn scan(cfg: &ExperimentConfig, out: Option<&Path>, m_list: &[usize], j_list: &[f64]) -> Result<Status> {
    let (m_list, j_list) = match (&cfg.scan, m_list.is_empty(), j_list.is_empty()) {
        (_, false, false) => (m_list.to_vec(), j_list.to_vec()),
        (Some(s), true, true) => (s.m.clone(), s.j.clone()),
        (Some(s), mi, ji) => (
            if mi { s.m.clone() } else { m_list.to_vec() },
            if ji { s.j.clone() } else { j_list.to_vec() },
        ),
        (None, _, _) => bail!("scan needs m and j lists, from --m-list/--j-list or a [scan] section"),
    };
    check_scan_lists(&m_list, &j_list)?;
    let lattice = cfg.lattice()?;
    let mut rows = Vec::new();
    let mut curves = String::new();
    let mut failed = false;
    for &j in &j_list {
        writeln!(curves, "# J = {j}\n# m energy_per_site")?;
        for &m in &m_list {
            let mut cell = cfg.clone();
            cell.model.j = j;
            cell.dmrg.m = m;
            eprintln!("scan cell m = {m}, J = {j}");
            let mut row = vec![m.to_string(), j.to_string()];
            match run_ground_state_with(&lattice, &cell.params(), &cell.dmrg_config(), log_sweep) {
                Ok(r) => {
                    let last = r.sweeps.last().expect("at least one sweep");
                    row.extend([
                        fmt12(r.energy_per_site),
                        fmt12(r.energy_total),
                        r.sweeps.len().to_string(),
                        r.converged.to_string(),
                        last.max_bond.to_string(),
                        fmt12(last.discarded_weight),
                        fmt12(r.n_up),
                        fmt12(r.n_down),
                    ]);
                    if r.converged {
                        row.push("ok".into());
                    } else {
                        failed = true;
                        row.push("not converged".into());
                    }
                    writeln!(curves, "{m} {}", fmt12(r.energy_per_site))?;
                }
                Err(e) => {
                    failed = true;
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.push(format!("error: {e}"));
                }
            }
            rows.push(row);
        }
        curves.push_str("\n\n");
    }
    let path = out_path(cfg, out, "scan.csv");
    let echo = cfg.echo();
    write_csv(&path, &echo, &SCAN_HEADER, &rows)?;
    std::fs::write(sibling(&path, "dat"), format!("{echo}{curves}"))?;
    println!("{} cells written to {}", rows.len(), path.display());
    Ok(if failed { Status::Unconverged } else { Status::Ok })
}
