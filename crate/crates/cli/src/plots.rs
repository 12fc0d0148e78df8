//! `emit-plots`: whitespace-separated data files for gnuplot, one per
//! result series found in a results directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use skld::quasipotential::SkLimitTable;

use crate::error::CliError;
use crate::experiments::{ExitSummary, SkConvergeSummary};
use crate::output::{Document, Provenance};

struct Series {
    source: &'static str,
    target: &'static str,
    render: fn(&Path) -> Result<String, CliError>,
}

const SERIES: [Series; 3] = [
    Series {
        source: "sk_limit.json",
        target: "sk_limit.dat",
        render: sk_limit,
    },
    Series {
        source: "exit.json",
        target: "exit_scaling.dat",
        render: exit_scaling,
    },
    Series {
        source: "sk_converge.json",
        target: "sk_converge.dat",
        render: sk_converge,
    },
];

/// Writes every series whose result file exists and warns about the rest.
/// Returns the files written.
pub fn emit(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut written = Vec::new();
    for s in &SERIES {
        let source = dir.join(s.source);
        if !source.is_file() {
            eprintln!(
                "warning: {} not found, skipping {}",
                source.display(),
                s.target
            );
            continue;
        }
        let text = (s.render)(&source)?;
        let path = dir.join(s.target);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    if written.is_empty() {
        eprintln!("warning: no result series in {}", dir.display());
    }
    Ok(written)
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<Document<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn header(p: &Provenance, title: &str, columns: &[&str]) -> String {
    format!("{}# {title}\n# {}\n", p.comment(), columns.join("\t"))
}

fn sk_limit(path: &Path) -> Result<String, CliError> {
    let doc: Document<SkLimitTable> = load(path)?;
    let mut s = header(
        &doc.provenance,
        "small-mass ladder of the quasi-potential",
        &["mu", "V_mu(x)", "V(x)", "|V_mu(x)-V(x)|"],
    );
    for r in &doc.result.rows {
        let _ = writeln!(
            s,
            "{:e}\t{:e}\t{:e}\t{:e}",
            r.mu, r.v_mu, doc.result.v, r.gap
        );
    }
    Ok(s)
}

fn exit_scaling(path: &Path) -> Result<String, CliError> {
    let doc: Document<ExitSummary> = load(path)?;
    let mut s = header(
        &doc.provenance,
        "exit-time scaling eps*log(mean tau) -> inf V on the boundary",
        &["eps", "eps*log(mean_tau)", "ci_low", "ci_high", "target"],
    );
    for st in doc.result.levels.iter().filter_map(|l| l.stats.as_ref()) {
        let target = st
            .target
            .map_or_else(|| "NaN".to_owned(), |t| format!("{t:e}"));
        let _ = writeln!(
            s,
            "{:e}\t{:e}\t{:e}\t{:e}\t{target}",
            st.eps, st.eps_log_mean, st.ci_low, st.ci_high
        );
    }
    Ok(s)
}

fn sk_converge(path: &Path) -> Result<String, CliError> {
    let doc: Document<SkConvergeSummary> = load(path)?;
    let mut s = header(
        &doc.provenance,
        "small-mass convergence sup_t |u_mu - u|_H over shared noise",
        &["mu", "median", "mean"],
    );
    let st = &doc.result.study;
    for j in 0..st.mu.len() {
        let _ = writeln!(s, "{:e}\t{:e}\t{:e}", st.mu[j], st.median[j], st.mean[j]);
    }
    Ok(s)
}
