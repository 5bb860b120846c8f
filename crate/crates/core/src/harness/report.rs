use std::fmt::Write;

use super::AmnesicReport;

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), pct)
}

/// Human-readable tables: probing, main task, per-category deltas,
/// selectivity and embedding diagnostics.
pub fn render_markdown(r: &AmnesicReport) -> String {
    let mut s = String::new();
    let m = r.method.as_str().to_uppercase();
    let _ = writeln!(s, "# Amnesic probing report: {m}\n");
    if let Some(h) = &r.dataset_hash {
        let _ = writeln!(s, "Dataset `{h}`, d = {}, {} train / {} eval rows.\n", r.dim, r.n_train, r.n_eval);
    }

    let _ = writeln!(s, "## Probing the concept\n");
    let _ = writeln!(s, "| | accuracy (%) |\n|---|---|");
    let _ = writeln!(s, "| Majority class | {} |", pct(r.probe_before.majority_fraction));
    let _ = writeln!(s, "| Vanilla | {} |", pct(r.probe_before.accuracy));
    let _ = writeln!(s, "| {m} | {} |", pct(r.probe_after.accuracy));
    let _ = writeln!(s, "| Directions removed | {} |", r.directions_removed);
    if !r.converged {
        let _ = writeln!(s, "\n**Eraser did not converge** after {} iterations.", r.iterations);
    }

    let _ = writeln!(s, "\n## Main task\n");
    let _ = writeln!(s, "| | Acc (%) | D_KL |\n|---|---|---|");
    let _ = writeln!(s, "| Vanilla | {} | 0 |", pct(r.vanilla_task_acc));
    let _ = writeln!(s, "| {m} | {} | {:.4} |", pct(r.amnesic_task_acc), r.kl_amnesic);
    let _ = writeln!(s, "| Rand. {m} | {} | {:.4} |", pct(r.random_control_acc), r.kl_random);
    let _ = writeln!(s, "| Dropout {m} | {} | {:.4} |", pct(r.dropout_control_acc), r.kl_dropout);
    let verdict = if r.nothing_removed {
        "nothing removed".to_string()
    } else if r.amnesic_exceeds_controls {
        "amnesic removal hurts more than both controls".to_string()
    } else {
        "amnesic removal does not exceed the controls".to_string()
    };
    let _ = writeln!(s, "\nInformation control: {verdict}.");

    let _ = writeln!(s, "\n## Per-category deltas (vanilla minus modified, %)\n");
    let _ = writeln!(s, "| category | n | vanilla | {m} | Rand. | Dropout |\n|---|---|---|---|---|---|");
    let arms = ["amnesic", "random", "dropout"].map(|k| r.per_class_delta.get(k));
    if let Some(rows) = arms[0] {
        for (i, row) in rows.iter().enumerate() {
            let delta = |a: Option<&Vec<super::CategoryDelta>>| {
                opt_pct(a.and_then(|v| v.get(i)).and_then(|c| c.delta))
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                row.category,
                row.n,
                opt_pct(row.vanilla_acc),
                delta(arms[0]),
                delta(arms[1]),
                delta(arms[2])
            );
        }
    }

    let _ = writeln!(s, "\n## Selectivity\n");
    let _ = writeln!(s, "| | Accuracy (%) | Δ |\n|---|---|---|");
    let _ = writeln!(s, "| {m} | {} | |", pct(r.selectivity_baseline_acc));
    let _ = writeln!(
        s,
        "| Gold labels {m} | {} | {:+.2} |",
        pct(r.selectivity_acc),
        100.0 * r.selectivity_delta
    );

    let _ = writeln!(s, "\n## Embedding changes\n");
    let _ = writeln!(s, "| | value |\n|---|---|");
    let _ = writeln!(s, "| Dir. removed | {} |", r.directions_removed);
    let _ = writeln!(s, "| Rank before | {} |", r.rank_before);
    let _ = writeln!(s, "| Rank after | {} |", r.rank_after);
    let _ = writeln!(s, "| Rank Δ | {} |", r.rank_delta);
    let cos = r.mean_cosine.map_or_else(|| "n/a".into(), |c| format!("{c:.4}"));
    let _ = writeln!(s, "| Mean cosine | {cos} |");

    let _ = writeln!(s, "\n## Invariants\n");
    for c in &r.invariants {
        let mark = if c.passed { "ok" } else { "FAILED" };
        let _ = writeln!(s, "- {}: {mark} ({})", c.name, c.detail);
    }
    s
}
