use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::MetricOutput;
use super::store::ResultStore;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_text};
use crate::metrics::{loo_predictions, CURVE_BINS};

pub const TABLE_FILE: &str = "table1.csv";
pub const CURVES_FILE: &str = "fig4_curves.csv";
pub const SCATTER_FILE: &str = "fig5_scatter.csv";
pub const CONFUSION_FILE: &str = "confusion_inputs.csv";
/// Row id of the mean rectangular-domain curve in the curves file.
pub const RECT_MEAN_ROW: &str = "rect_mean";
/// System id of the raw-load 1-NN baseline in the confusion inputs.
pub const DIRECT_ROW: &str = "direct";

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `system,ns,depth,spearman_rho,accuracy`, one row per configured system;
/// failed systems keep their row with empty metric fields.
pub fn table1_csv(store: &ResultStore) -> String {
    let mut out = String::from("system,ns,depth,spearman_rho,accuracy\n");
    for (spec, entry) in &store.entries {
        match entry {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{spec},{},{},{},{}",
                    r.ns,
                    opt(r.depth),
                    fmt_f64(r.eval.spearman_rho),
                    fmt_f64(r.eval.accuracy)
                );
            }
            Err(_) => {
                let _ = writeln!(out, "{spec},,,,");
            }
        }
    }
    out
}

/// Mean collision curve over the stored rectangular systems:
/// `(bin_centers, p_collision)`, or `None` without rectangles.
pub fn rect_mean_curve(store: &ResultStore) -> Option<(Vec<f64>, Vec<f64>)> {
    let curves: Vec<_> = store
        .reports()
        .filter(|(s, _)| s.is_rectangle())
        .map(|(_, r)| &r.eval.curve)
        .collect();
    if curves.is_empty() {
        return None;
    }
    let n = curves.len() as f64;
    let mean = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
        let cols: Vec<Vec<f64>> = (0..curves.len()).map(f).collect();
        (0..CURVE_BINS)
            .map(|b| cols.iter().map(|c| c[b]).sum::<f64>() / n)
            .collect()
    };
    Some((
        mean(&|i| curves[i].bin_centers.clone()),
        mean(&|i| curves[i].p_collision.clone()),
    ))
}

/// `system,d1..d5,p1..p5` (mean load distance and collision probability per
/// bin), then the rectangular mean.
pub fn curves_csv(store: &ResultStore) -> String {
    let mut out = String::from("system");
    for prefix in ["d", "p"] {
        for b in 1..=CURVE_BINS {
            let _ = write!(out, ",{prefix}{b}");
        }
    }
    out.push('\n');
    let mut row = |id: &str, d: &[f64], p: &[f64]| {
        out.push_str(id);
        for v in d.iter().chain(p) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    };
    for (spec, r) in store.reports() {
        row(
            &spec.to_string(),
            &r.eval.curve.bin_centers,
            &r.eval.curve.p_collision,
        );
    }
    if let Some((d, p)) = rect_mean_curve(store) {
        row(RECT_MEAN_ROW, &d, &p);
    }
    out
}

pub fn scatter_csv(store: &ResultStore) -> String {
    let mut out = String::from("system,family,ns,spearman_rho,accuracy\n");
    for (spec, r) in store.reports() {
        let _ = writeln!(
            out,
            "{spec},{},{},{},{}",
            r.family,
            r.ns,
            fmt_f64(r.eval.spearman_rho),
            fmt_f64(r.eval.accuracy)
        );
    }
    out
}

/// `system,load_index,true_class,predicted_class` for the raw-load baseline
/// and every reported system.
pub fn confusion_csv(store: &ResultStore) -> Result<String> {
    let corpus = store.corpus()?;
    let labels = corpus.labels();
    let samples: Vec<&[f64]> = corpus.loads().iter().map(|w| w.samples()).collect();
    let direct = loo_predictions(&samples, &labels, 1, store.manifest.config.norm)?;
    let mut out = String::from("system,load_index,true_class,predicted_class\n");
    let mut rows = |id: &str, preds: &[u32]| {
        for (i, (t, p)) in labels.iter().zip(preds).enumerate() {
            let _ = writeln!(out, "{id},{i},{t},{p}");
        }
    };
    rows(DIRECT_ROW, &direct);
    for (spec, r) in store.reports() {
        if r.eval.predictions.len() != labels.len() {
            return Err(Error::Config(format!(
                "{spec}: report has no per-load predictions"
            )));
        }
        rows(&spec.to_string(), &r.eval.predictions);
    }
    Ok(out)
}

/// Writes `table1.csv` and the enabled plot-data files into the store root;
/// returns the paths written.
pub fn emit_report(store: &ResultStore) -> Result<Vec<PathBuf>> {
    if store.entries.is_empty() {
        return Err(Error::Config(format!(
            "store {} has no systems",
            store.root.display()
        )));
    }
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let path = store.root.join(name);
        write_text(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(TABLE_FILE, &table1_csv(store))?;
    let mut outputs = store.manifest.config.metrics.clone();
    outputs.sort();
    outputs.dedup();
    for output in outputs {
        match output {
            MetricOutput::Curves => put(CURVES_FILE, &curves_csv(store))?,
            MetricOutput::Scatter => put(SCATTER_FILE, &scatter_csv(store))?,
            MetricOutput::Confusion => put(CONFUSION_FILE, &confusion_csv(store)?)?,
        }
    }
    Ok(written)
}

/// Opens the store at `root` and emits its report.
pub fn emit_report_at(root: &Path) -> Result<Vec<PathBuf>> {
    emit_report(&ResultStore::open(root)?)
}
