use iot_core::cost::CostReport;
use iot_core::load::RunSummary;

pub fn cost_table(r: &CostReport) -> String {
    let mut out = format!(
        "{:<22} {:>14}\n{:<22} {:>14}\n{:<22} {:>14}\n",
        "deployment",
        r.deployment,
        "requests",
        r.requests,
        "total (USD)",
        format!("{:.6}", r.total_usd),
    );
    for (k, v) in &r.breakdown {
        out.push_str(&format!("{:<22} {:>14}\n", format!("  {k}"), format!("{v:.6}")));
    }
    out.push_str(&format!(
        "{:<22} {:>14}",
        "cents / 1000 requests",
        format!("{:.4}", r.cost_cents_per_1000_requests)
    ));
    out
}

/// One row per run: requests, average and p95, like a results table.
pub fn runs_table(rows: &[RunSummary]) -> String {
    let mut out = format!(
        "{:<24} {:<11} {:<8} {:>10} {:>9} {:>10} {:>10}\n",
        "endpoint", "mode", "scenario", "requests", "ok %", "avg (ms)", "p95 (ms)"
    );
    for s in rows {
        let r = &s.report;
        out.push_str(&format!(
            "{:<24} {:<11} {:<8} {:>10} {:>9.2} {:>10.2} {:>10.2}{}\n",
            s.manifest.endpoint,
            s.manifest.mode,
            s.manifest.scenario,
            r.total_requests,
            r.success_rate() * 100.0,
            r.average_ms,
            r.p95_ms,
            if r.incomplete { "  (incomplete)" } else { "" },
        ));
    }
    out.pop();
    out
}
